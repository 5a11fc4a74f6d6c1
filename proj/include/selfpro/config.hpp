#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfpro/harness.hpp"
#include "selfpro/pretrain.hpp"
#include "selfpro/prompt.hpp"

namespace selfpro {

// Merged run configuration. The file is INI-style with [run], [pretrain],
// [prompt] and [harness] sections; key names are unique across sections so
// overrides may omit the section ("mu=0.3" or "prompt.mu=0.3").
struct RunConfig {
  std::uint64_t seed = 0;
  PretrainConfig pretrain;
  PromptConfig prompt;
  HarnessOptions harness;
  std::string hash;  // SHA-256 (hex) of the canonical dump
};

struct ConfigKey {
  std::string section;
  std::string name;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default, in canonical order.
std::span<const ConfigKey> config_keys();

RunConfig default_config();

// File values override defaults, overrides override the file. An empty path
// means defaults only.
RunConfig parse_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides);

// "section.key=value" lines sorted by section then key; the hashed text.
std::string canonical_dump(const RunConfig& cfg);

// Writes the canonical dump as an INI file parse_config can read back.
void write_config(const RunConfig& cfg, const std::filesystem::path& path);

std::size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace selfpro
