#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lightleak/error.hpp"
#include "lightleak/inference.hpp"

namespace lightleak::inference {
namespace {

using nlohmann::json;

constexpr char kTemplateMagic[4] = {'L', 'L', 'T', 'P'};
constexpr std::uint16_t kTemplateVersion = 1;
constexpr std::size_t kTemplateHeader = 32;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& b, std::size_t off, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[off + i]) << (8 * i);
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_le(out, bits, 8);
}

double get_f64(const std::vector<std::uint8_t>& b, std::size_t off) {
  const std::uint64_t bits = get_le(b, off, 8);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

// Ids become file names; keep them to a portable character set.
void check_id(const std::string& id) {
  if (id.empty() || id.size() > 200) throw Error(Errc::invalid_argument, "media id must be 1..200 chars");
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok || id == "." || id == "..") {
      throw Error(Errc::invalid_argument, "media id '" + id + "' has characters outside [A-Za-z0-9._-]");
    }
  }
}

}  // namespace

void write_template(const Template& t, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out(kTemplateMagic, kTemplateMagic + 4);
  put_le(out, kTemplateVersion, 2);
  out.push_back(static_cast<std::uint8_t>(t.kind));
  out.push_back(static_cast<std::uint8_t>(t.series.dims));
  put_f64(out, t.rate_hz);
  put_le(out, t.series.length(), 8);
  out.push_back(t.usable ? 1 : 0);
  out.insert(out.end(), 7, 0);
  for (double v : t.series.values) put_f64(out, v);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io_error, "cannot write template " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

Template read_template(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open template " + path.string());
  std::vector<std::uint8_t> b{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  if (b.size() < kTemplateHeader || std::memcmp(b.data(), kTemplateMagic, 4) != 0 ||
      get_le(b, 4, 2) != kTemplateVersion) {
    throw Error(Errc::io_error, path.string() + ": not a version-1 template file");
  }
  Template t;
  t.kind = static_cast<MediaKind>(b[6]);
  t.series.dims = b[7];
  t.rate_hz = get_f64(b, 8);
  const auto length = get_le(b, 16, 8);
  t.usable = b[24] != 0;
  if ((t.series.dims != 1 && t.series.dims != 3) || b[6] > 1 ||
      b.size() != kTemplateHeader + length * t.series.dims * 8) {
    throw Error(Errc::io_error, path.string() + ": inconsistent template header");
  }
  t.series.values.resize(length * t.series.dims);
  for (std::size_t i = 0; i < t.series.values.size(); ++i) {
    t.series.values[i] = get_f64(b, kTemplateHeader + 8 * i);
  }
  return t;
}

void ReferenceLibrary::add(Template t) {
  check_id(t.id);
  if (templates_.count(t.id)) throw Error(Errc::invalid_argument, "duplicate media id '" + t.id + "'");
  std::string id = t.id;
  templates_.emplace(std::move(id), std::move(t));
}

const Template* ReferenceLibrary::find(const std::string& id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

std::vector<const Template*> ReferenceLibrary::templates() const {
  std::vector<const Template*> out;
  out.reserve(templates_.size());
  for (const auto& [id, t] : templates_) out.push_back(&t);
  return out;
}

std::vector<std::string> ReferenceLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

ReferenceLibrary ReferenceLibrary::subset(std::span<const std::string> ids) const {
  ReferenceLibrary out;
  for (const auto& id : ids) {
    if (const Template* t = find(id)) out.add(*t);
  }
  return out;
}

void ReferenceLibrary::save(const std::filesystem::path& dir) const {
  // stale templates from an earlier save would linger otherwise
  std::filesystem::remove_all(dir / "templates");
  std::filesystem::create_directories(dir / "templates");
  json manifest;
  manifest["format"] = "lightleak-library";
  manifest["version"] = 1;
  json entries = json::array();
  for (const auto& [id, t] : templates_) {
    const std::string rel = "templates/" + id + ".tpl";
    write_template(t, dir / rel);
    entries.push_back({{"id", id},
                       {"kind", to_string(t.kind)},
                       {"title", t.info.title},
                       {"genre", t.info.genre},
                       {"template", rel},
                       {"usable", t.usable}});
  }
  manifest["entries"] = std::move(entries);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

ReferenceLibrary ReferenceLibrary::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(Errc::io_error, "no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::io_error, std::string("manifest parse error: ") + e.what());
  }
  if (manifest.value("format", "") != "lightleak-library") {
    throw Error(Errc::io_error, dir.string() + ": not a lightleak library");
  }
  ReferenceLibrary lib;
  try {
    for (const auto& e : manifest.at("entries")) {
      Template t = read_template(dir / e.at("template").get<std::string>());
      t.id = e.at("id").get<std::string>();
      if (media_kind_from_string(e.at("kind").get<std::string>()) != t.kind) {
        throw Error(Errc::io_error, "manifest kind disagrees with template for '" + t.id + "'");
      }
      t.info = {t.id, e.value("title", std::string()), e.value("genre", std::string())};
      lib.add(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::io_error, std::string("manifest schema error: ") + e.what());
  }
  return lib;
}

}  // namespace lightleak::inference
