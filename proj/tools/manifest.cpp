#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "eleatt/error.hpp"

namespace eleatt::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_text() const {
  std::string out = "ELEATT-MANIFEST\n";
  out += "command=" + command + "\n";
  out += "tool_version=" + std::string(kToolVersion) + "\n";
  for (const auto& [k, v] : fields) out += k + "=" + v + "\n";
  for (const auto& [k, v] : config.values()) out += "config." + k + "=" + v + "\n";
  for (const auto& [k, v] : artifacts) out += "artifact." + k + "=" + v + "\n";
  out += "started=" + started + "\n";
  out += "finished=" + finished + "\n";
  return out;
}

void RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  out << to_text();
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
}

KeyValueConfig config_from_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ELEATT-MANIFEST") throw ConfigError(path.string() + " is not a run manifest");
  std::string body;
  while (std::getline(in, line)) {
    if (line.rfind("config.", 0) == 0) body += line.substr(7) + "\n";
  }
  return KeyValueConfig::parse(body, path.string());
}

}  // namespace eleatt::cli
