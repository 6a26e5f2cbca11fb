#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pldlab {

// Sidecar JSON written next to every run output so a result can be traced
// back to the exact command, seed, and input bytes that produced it.
struct RunManifest {
  std::string run_id;
  std::string command;             // subcommand name
  std::vector<std::string> args;   // raw argv tail
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::uint64_t dataset_hash = 0;  // fnv1a over the file bytes
  std::string started_utc;         // ISO-8601, process start
  std::string finished_utc;        // ISO-8601, manifest write
};

std::uint64_t file_fnv1a(const std::string& path);
std::string utc_now_string();
void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace pldlab
