#include "icee/checkpoint.hpp"

#include <fstream>

#include "icee/tensor_io.hpp"

namespace icee {

const Tensor& Checkpoint::tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError("checkpoint has no tensor section '" + name + "'");
    return it->second;
}

void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& header,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::filesystem::create_directories(dir);
    nlohmann::json doc = header;
    auto& table = doc["tensors"] = nlohmann::json::object();
    for (const auto& [name, tensor] : tensors) {
        const std::string file = name + ".icee";
        table[name] = file;
        save_tensor(dir / file, *tensor);
    }
    write_text_file(dir / "checkpoint.json", doc.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const auto path = dir / "checkpoint.json";
    std::ifstream is(path);
    if (!is) throw ArtifactMissing("missing checkpoint " + path.string());
    Checkpoint ck;
    ck.header = nlohmann::json::parse(is);
    for (const auto& [name, file] : ck.header.at("tensors").items())
        ck.tensors.emplace(name, load_tensor(dir / file.get<std::string>()));
    ck.header.erase("tensors");
    return ck;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace icee
