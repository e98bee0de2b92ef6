#include "crystalgym/core/errors.hpp"

namespace crystalgym {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "ParseError";
    case ErrorKind::validation: return "ValidationError";
    case ErrorKind::lookup: return "LookupError";
    case ErrorKind::index: return "IndexError";
    case ErrorKind::domain: return "DomainError";
    case ErrorKind::action_space: return "ActionSpaceError";
    case ErrorKind::fit: return "FitError";
    case ErrorKind::io: return "IOError";
    case ErrorKind::store: return "StoreError";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::episode_done: return "EpisodeDoneError";
    case ErrorKind::action: return "ActionError";
    case ErrorKind::shape: return "ShapeError";
    case ErrorKind::graph: return "GraphError";
    case ErrorKind::checkpoint_mismatch: return "CheckpointMismatchError";
  }
  return "Error";
}

void throw_error(ErrorKind kind, const std::string& message) {
  switch (kind) {
    case ErrorKind::parse: throw ParseError(message);
    case ErrorKind::validation: throw ValidationError(message);
    case ErrorKind::lookup: throw LookupError(message);
    case ErrorKind::index: throw IndexError(message);
    case ErrorKind::domain: throw DomainError(message);
    case ErrorKind::action_space: throw ActionSpaceError(message);
    case ErrorKind::fit: throw FitError(message);
    case ErrorKind::io: throw IoError(message);
    case ErrorKind::store: throw StoreError(message);
    case ErrorKind::config: throw ConfigError(message);
    case ErrorKind::episode_done: throw EpisodeDoneError(message);
    case ErrorKind::action: throw ActionError(message);
    case ErrorKind::shape: throw ShapeError(message);
    case ErrorKind::graph: throw GraphError(message);
    case ErrorKind::checkpoint_mismatch: throw CheckpointMismatchError(message);
  }
  throw Error(kind, message);
}

}  // namespace crystalgym
