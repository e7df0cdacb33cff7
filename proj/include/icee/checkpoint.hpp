#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icee/tensor.hpp"

namespace icee {

// Raised when an upstream artifact directory or file does not exist.
struct ArtifactMissing : IoError {
    using IoError::IoError;
};

struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, Tensor> tensors;

    const Tensor& tensor(const std::string& name) const;
};

// <dir>/checkpoint.json holds the header plus a "tensors" table mapping each
// section name to its <name>.icee file in the same directory.
void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& header,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace icee
