#include "pldlab/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "pldlab/errors.hpp"

namespace pldlab {

using nlohmann::json;

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    const auto n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string utc_now_string() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  json j{{"run_id", m.run_id},
         {"command", m.command},
         {"args", m.args},
         {"seed", m.seed},
         {"dataset", m.dataset_path},
         {"dataset_hash", m.dataset_hash},
         {"started_utc", m.started_utc},
         {"finished_utc", m.finished_utc}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
  if (!f.good()) throw DataError("write failed for '" + path + "'");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for reading");
  json j = json::parse(f, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw FormatError("manifest is not valid JSON", 0);
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dataset_path = j.at("dataset").get<std::string>();
    m.dataset_hash = j.at("dataset_hash").get<std::uint64_t>();
    m.started_utc = j.value("started_utc", std::string());
    m.finished_utc = j.value("finished_utc", std::string());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest field: ") + e.what(), 0);
  }
  return m;
}

}  // namespace pldlab
