#pragma once

// Run manifest: config snapshot, input digests, tool version, stage timings
// and a run id derived from everything except the timings.

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <fmt/format.h>
#include <json.hpp>

#include "threshkit/error.hpp"
#include "threshkit/io.hpp"

namespace threshkit {

inline constexpr const char* kToolVersion = "threshkit 1.0.0";

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::input, "sha256 failed");
  }
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

struct InputDigest {
  std::string name;  // file name without directories
  std::string sha256;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::string config;
  std::vector<InputDigest> inputs;
  std::vector<StageTiming> timings;

  void add_input(const std::filesystem::path& path) {
    inputs.push_back({path.filename().string(), sha256_hex(read_file(path))});
  }

  std::string run_id() const {
    std::string material = command + '\n' + tool_version + '\n' + config;
    for (const auto& in : inputs) material += in.name + ':' + in.sha256 + '\n';
    return sha256_hex(material).substr(0, 16);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["run_id"] = run_id();
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["config"] = config;
    auto& in = j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& d : inputs) in.push_back({{"name", d.name}, {"sha256", d.sha256}});
    auto& t = j["timings"] = nlohmann::ordered_json::array();
    for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"ms", s.milliseconds}});
    return j;
  }

  void write(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }
};

/// Times a scope and appends it to a manifest.
class StageTimer {
public:
  StageTimer(RunManifest& manifest, std::string stage)
      : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;
  ~StageTimer() {
    const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start_;
    manifest_.timings.push_back({stage_, d.count()});
  }

private:
  RunManifest& manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace threshkit
