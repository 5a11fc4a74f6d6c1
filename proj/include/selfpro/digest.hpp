#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "selfpro/model.hpp"

namespace selfpro {

std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

// Hash of shapes and raw parameter bytes.
std::string params_digest(const EncoderParams& p);
std::string params_digest(const ProjectorParams& p);

// Digest of the files of an edge_list_dir (edges, features, labels).
std::string data_digest(const std::filesystem::path& dir);

}  // namespace selfpro
