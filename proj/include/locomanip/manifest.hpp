#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace locomanip::manifest {

// FNV-1a over bytes; pass the previous result as `h` to chain buffers.
uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a_string(const std::string& s);
uint64_t hash_file(const std::string& path);
std::string hash_hex(uint64_t h);

const char* tool_version();

// Record of one subcommand run: what was asked, what was read, what was
// produced. Input hashes let downstream stages verify their inputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // fully resolved key=value
  uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> hash
  std::map<std::string, std::string> outputs;  // path -> hash
  double wall_seconds = 0.0;
  std::string version;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
};

// Written to a temporary file in the target directory and renamed into
// place, so a manifest is either absent or complete.
void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

// Throws DataError when the file's current hash differs from the recorded one.
void verify_hash(const std::string& path, const std::string& expected_hex);

// Advisory exclusive lock on a run directory; a second holder fails fast
// instead of interleaving stage outputs.
class RunLock {
 public:
  explicit RunLock(const std::string& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace locomanip::manifest
