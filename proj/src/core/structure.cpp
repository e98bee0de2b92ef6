#include "crystalgym/core/structure.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

double wrap_unit(double x) {
  double w = x - std::floor(x);
  // floor can leave exactly 1.0 for tiny negative inputs
  if (w >= 1.0) w = 0.0;
  return w == 0.0 ? 0.0 : w;
}

std::string format10(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

double canonical10(double x) { return std::strtod(format10(x).c_str(), nullptr); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

class LineContext {
 public:
  LineContext(std::string_view source, std::size_t line) : source_(source), line_(line) {}

  std::string where(std::string_view field) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << " [" << field << "]";
    return os.str();
  }

  double number(std::string_view token, std::string_view field) const {
    std::string s(token);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
      throw ParseError(where(field) + ": expected a number, got '" + s + "'");
    }
    return canonical10(v);
  }

 private:
  std::string_view source_;
  std::size_t line_;
};

}  // namespace

Structure::Structure(std::string name, Lattice lattice, std::vector<Vec3> sites, int space_group,
                     std::size_t max_sites)
    : name_(std::move(name)), lattice_(std::move(lattice)), sites_(std::move(sites)), space_group_(space_group) {
  if (sites_.empty() || sites_.size() > max_sites) {
    throw ValidationError("structure '" + name_ + "' has " + std::to_string(sites_.size()) +
                          " sites; expected 1.." + std::to_string(max_sites));
  }
  if (space_group_ < 1 || space_group_ > 230) {
    throw ValidationError("structure '" + name_ + "': space group " + std::to_string(space_group_) +
                          " outside [1, 230]");
  }
  for (auto& site : sites_) {
    for (auto& x : site) {
      if (!std::isfinite(x)) throw ValidationError("structure '" + name_ + "': non-finite coordinate");
      x = wrap_unit(x);
    }
  }
}

Vec3 Structure::cartesian(std::size_t site) const {
  if (site >= sites_.size()) throw IndexError("site index " + std::to_string(site) + " out of range");
  return lattice_.to_cartesian(sites_[site]);
}

Structure Structure::scaled(double s) const {
  return Structure(name_, lattice_.scaled(s), sites_, space_group_, sites_.size());
}

std::uint64_t Structure::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize_structure(*this)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

bool Structure::operator==(const Structure& other) const {
  return name_ == other.name_ && lattice_ == other.lattice_ && sites_ == other.sites_ &&
         space_group_ == other.space_group_;
}

double periodic_distance(std::size_t u, std::size_t v, const Shift& shift, const Structure& s) {
  if (u >= s.site_count() || v >= s.site_count()) {
    throw IndexError("site pair (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for " +
                     std::to_string(s.site_count()) + " sites");
  }
  const auto& L = s.lattice().vectors();
  const Vec3 offset = static_cast<double>(shift.c1) * L[0] + static_cast<double>(shift.c2) * L[1] +
                      static_cast<double>(shift.c3) * L[2];
  return norm(s.cartesian(v) + offset - s.cartesian(u));
}

Structure parse_structure(std::string_view text, std::string_view source, std::size_t max_sites) {
  std::optional<LatticeParameters> lattice;
  std::optional<int> space_group;
  std::optional<std::string> name;
  std::vector<Vec3> sites;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const LineContext ctx(source, line_no);
    const auto tokens = split_ws(line);
    const auto key = tokens.front();
    if (key == "lattice") {
      if (lattice) throw ParseError(ctx.where("lattice") + ": duplicate lattice line");
      if (tokens.size() != 7) throw ParseError(ctx.where("lattice") + ": expected 6 values");
      LatticeParameters p;
      p.a = ctx.number(tokens[1], "lattice.a");
      p.b = ctx.number(tokens[2], "lattice.b");
      p.c = ctx.number(tokens[3], "lattice.c");
      p.alpha = ctx.number(tokens[4], "lattice.phi1");
      p.beta = ctx.number(tokens[5], "lattice.phi2");
      p.gamma = ctx.number(tokens[6], "lattice.phi3");
      lattice = p;
    } else if (key == "spacegroup") {
      if (space_group) throw ParseError(ctx.where("spacegroup") + ": duplicate spacegroup line");
      if (tokens.size() != 2) throw ParseError(ctx.where("spacegroup") + ": expected one integer");
      const double v = ctx.number(tokens[1], "spacegroup");
      if (v != std::floor(v)) throw ParseError(ctx.where("spacegroup") + ": expected an integer");
      space_group = static_cast<int>(v);
    } else if (key == "name") {
      if (name) throw ParseError(ctx.where("name") + ": duplicate name line");
      const auto rest = trim(line.substr(4));
      if (rest.empty()) throw ParseError(ctx.where("name") + ": empty name");
      name = std::string(rest);
    } else if (key == "site") {
      if (tokens.size() != 4) throw ParseError(ctx.where("site") + ": expected 3 fractional coordinates");
      Vec3 f{ctx.number(tokens[1], "site.fx"), ctx.number(tokens[2], "site.fy"), ctx.number(tokens[3], "site.fz")};
      for (auto& x : f) x = canonical10(wrap_unit(x));
      sites.push_back(f);
    } else {
      throw ParseError(ctx.where("key") + ": unknown record '" + std::string(key) + "'");
    }
  }

  const std::string src(source);
  if (!lattice) throw ParseError(src + ": missing 'lattice' line");
  if (!space_group) throw ParseError(src + ": missing 'spacegroup' line");
  if (!name) throw ParseError(src + ": missing 'name' line");

  try {
    return Structure(*name, Lattice(*lattice), std::move(sites), *space_group, max_sites);
  } catch (const ValidationError& e) {
    throw ValidationError(src + ": " + e.what());
  }
}

Structure parse_structure_file(const std::filesystem::path& path, std::size_t max_sites) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open structure file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_structure(buf.str(), path.string(), max_sites);
}

std::string serialize_structure(const Structure& s) {
  const auto& p = s.lattice().parameters();
  std::ostringstream os;
  os << "lattice " << format10(p.a) << ' ' << format10(p.b) << ' ' << format10(p.c) << ' ' << format10(p.alpha)
     << ' ' << format10(p.beta) << ' ' << format10(p.gamma) << '\n';
  os << "spacegroup " << s.space_group() << '\n';
  os << "name " << s.name() << '\n';
  for (const auto& f : s.sites()) {
    os << "site " << format10(f[0]) << ' ' << format10(f[1]) << ' ' << format10(f[2]) << '\n';
  }
  return os.str();
}

}  // namespace crystalgym
