#pragma once

#include <stdexcept>
#include <string>

namespace crystalgym {

// Error categories. The C API maps them one-to-one onto cg_status codes.
enum class ErrorKind {
  parse,
  validation,
  lookup,
  index,
  domain,
  action_space,
  fit,
  io,
  store,
  config,
  episode_done,
  action,
  shape,
  graph,
  checkpoint_mismatch,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CRYSTALGYM_DEFINE_ERROR(Name, Kind)                                     \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

CRYSTALGYM_DEFINE_ERROR(ParseError, parse)
CRYSTALGYM_DEFINE_ERROR(ValidationError, validation)
CRYSTALGYM_DEFINE_ERROR(LookupError, lookup)
CRYSTALGYM_DEFINE_ERROR(IndexError, index)
CRYSTALGYM_DEFINE_ERROR(DomainError, domain)
CRYSTALGYM_DEFINE_ERROR(ActionSpaceError, action_space)
CRYSTALGYM_DEFINE_ERROR(FitError, fit)
CRYSTALGYM_DEFINE_ERROR(IoError, io)
CRYSTALGYM_DEFINE_ERROR(StoreError, store)
CRYSTALGYM_DEFINE_ERROR(ConfigError, config)
CRYSTALGYM_DEFINE_ERROR(EpisodeDoneError, episode_done)
CRYSTALGYM_DEFINE_ERROR(ActionError, action)
CRYSTALGYM_DEFINE_ERROR(ShapeError, shape)
CRYSTALGYM_DEFINE_ERROR(GraphError, graph)
CRYSTALGYM_DEFINE_ERROR(CheckpointMismatchError, checkpoint_mismatch)

#undef CRYSTALGYM_DEFINE_ERROR

// Throws the subclass matching `kind`.
[[noreturn]] void throw_error(ErrorKind kind, const std::string& message);

}  // namespace crystalgym
