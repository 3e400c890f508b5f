#include "monoview/io/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "monoview/error.hpp"

namespace monoview::io {

namespace {

constexpr const char* kMagic = "monoview-weights v1";

static_assert(std::endian::native == std::endian::little,
              "weight blobs are little-endian; big-endian hosts are unsupported");

} // namespace

void save_tensors(const std::string& dir,
                  const std::vector<std::pair<std::string, const Tensorf*>>& tensors) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "cannot create directory " + dir + ": " + ec.message());

    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    require(manifest.good(), "cannot write manifest in " + dir);
    std::ofstream blob(fs::path(dir) / "weights.bin", std::ios::binary);
    require(blob.good(), "cannot write weights.bin in " + dir);

    manifest << kMagic << "\n" << tensors.size() << "\n";
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        require(name.find_first_of(" \t\n") == std::string::npos,
                "tensor name '" + name + "' contains whitespace");
        const Shape& s = t->shape();
        manifest << name << " float32 " << s.n << " " << s.h << " " << s.w << " "
                 << s.c << " " << offset << "\n";
        blob.write(reinterpret_cast<const char*>(t->data()),
                   static_cast<std::streamsize>(t->size() * sizeof(float)));
        offset += static_cast<std::uint64_t>(t->size()) * sizeof(float);
    }
    require(manifest.good() && blob.good(), "short write while saving weights to " + dir);
}

std::vector<std::pair<std::string, Tensorf>> load_tensors(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    require(manifest.good(), "cannot open manifest in " + dir);
    std::string magic;
    std::getline(manifest, magic);
    require(magic == kMagic, dir + ": unrecognized weight format '" + magic + "'");
    std::size_t count = 0;
    manifest >> count;

    std::ifstream blob(fs::path(dir) / "weights.bin", std::ios::binary);
    require(blob.good(), "cannot open weights.bin in " + dir);

    std::vector<std::pair<std::string, Tensorf>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string name, dtype;
        Shape s;
        std::uint64_t offset = 0;
        manifest >> name >> dtype >> s.n >> s.h >> s.w >> s.c >> offset;
        require(manifest.good(), dir + ": truncated manifest at tensor " + std::to_string(i));
        require(dtype == "float32", dir + ": tensor '" + name + "' has unsupported dtype " + dtype);
        Tensorf t(s);
        blob.seekg(static_cast<std::streamoff>(offset));
        blob.read(reinterpret_cast<char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
        require(blob.good(), dir + ": weights.bin truncated while reading '" + name + "'");
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

std::map<std::string, Tensorf> load_tensor_map(const std::string& dir) {
    std::map<std::string, Tensorf> out;
    for (auto& [name, t] : load_tensors(dir)) out.emplace(std::move(name), std::move(t));
    return out;
}

} // namespace monoview::io
