#include "locomanip/manifest.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "locomanip/errors.hpp"

namespace locomanip::manifest {

using json = nlohmann::json;

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read file for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = f.gcount();
    if (got > 0) h = fnv1a(buf.data(), static_cast<size_t>(got), h);
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* tool_version() { return "locomanip 0.1.0"; }

void RunManifest::add_input(const std::string& path) { inputs[path] = hash_hex(hash_file(path)); }

void RunManifest::add_output(const std::string& path) {
  outputs[path] = hash_hex(hash_file(path));
}

void write_manifest(const std::string& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["wall_seconds"] = m.wall_seconds;
  j["version"] = m.version.empty() ? tool_version() : m.version;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write manifest: " + tmp);
    f << j.dump(2) << "\n";
    f.flush();
    if (!f) throw DataError("short write on manifest: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move manifest into place: " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read manifest: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
  RunManifest m;
  m.command = j.value("command", "");
  m.seed = j.value("seed", static_cast<uint64_t>(0));
  m.wall_seconds = j.value("wall_seconds", 0.0);
  m.version = j.value("version", "");
  if (j.contains("config"))
    for (auto& [k, v] : j["config"].items()) m.config[k] = v.get<std::string>();
  if (j.contains("inputs"))
    for (auto& [k, v] : j["inputs"].items()) m.inputs[k] = v.get<std::string>();
  if (j.contains("outputs"))
    for (auto& [k, v] : j["outputs"].items()) m.outputs[k] = v.get<std::string>();
  return m;
}

void verify_hash(const std::string& path, const std::string& expected_hex) {
  const std::string actual = hash_hex(hash_file(path));
  if (actual != expected_hex)
    throw DataError("hash mismatch for " + path + ": expected " + expected_hex + ", found " +
                    actual);
}

RunLock::RunLock(const std::string& dir) {
  const std::string path = dir + "/.run_lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw ConfigError("cannot open run lock: " + path);
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ConfigError("run directory is locked by another process: " + dir);
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace locomanip::manifest
