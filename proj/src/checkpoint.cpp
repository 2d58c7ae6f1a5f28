#include "djcm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "djcm/csv.hpp"
#include "djcm/error.hpp"

namespace djcm::toy {

namespace {

constexpr const char* kMagic = "djcm-checkpoint";
constexpr int kVersion = 1;

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::string& prefix) {
    std::ostringstream manifest;
    std::string blob;
    manifest << kMagic << ' ' << kVersion << '\n';
    manifest << "phase " << model.completed_phase << '\n';
    manifest << "lambda " << csv::format(model.lambda) << '\n';
    std::size_t offset = 0;
    for (const auto& [name, v] : model.named_parameters()) {
        manifest << "array " << name << ' ' << offset << ' ' << v->value.size();
        for (std::size_t s : v->value.shape) manifest << ' ' << s;
        manifest << '\n';
        for (double d : v->value.data) {
            const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(d));
            blob.append(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        offset += v->value.size();
    }
    csv::write_atomic(prefix + ".bin", blob);
    csv::write_atomic(prefix + ".manifest", manifest.str());
}

ToyModel load_checkpoint(const std::string& prefix) {
    std::ifstream mf(prefix + ".manifest");
    if (!mf) throw Error(ErrorKind::Io, "cannot open " + prefix + ".manifest");
    std::ifstream bf(prefix + ".bin", std::ios::binary);
    if (!bf) throw Error(ErrorKind::Io, "cannot open " + prefix + ".bin");
    const std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

    std::string magic;
    int version = 0;
    mf >> magic >> version;
    if (magic != kMagic || version != kVersion) throw Error(ErrorKind::Io, prefix + ".manifest: bad header");

    ToyModel model(0);
    std::map<std::string, ad::Var> slots;
    for (auto& [name, v] : model.named_parameters()) slots.emplace(name, v);

    std::string line;
    std::getline(mf, line);
    int lineno = 1;
    std::size_t loaded = 0;
    while (std::getline(mf, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        auto fail = [&](const std::string& what) {
            return Error(ErrorKind::Io, prefix + ".manifest:" + std::to_string(lineno) + ": " + what);
        };
        if (key == "phase") {
            if (!(ls >> model.completed_phase)) throw fail("bad phase");
        } else if (key == "lambda") {
            if (!(ls >> model.lambda)) throw fail("bad lambda");
        } else if (key == "array") {
            std::string name;
            std::size_t offset = 0, count = 0;
            if (!(ls >> name >> offset >> count)) throw fail("bad array entry");
            std::vector<std::size_t> shape;
            for (std::size_t s; ls >> s;) shape.push_back(s);
            auto it = slots.find(name);
            if (it == slots.end()) throw fail("unknown array " + name);
            ad::Var& v = it->second;
            if (shape != v->value.shape || count != v->value.size()) {
                throw Error(ErrorKind::Shape, prefix + ".manifest:" + std::to_string(lineno) + ": shape mismatch for " + name);
            }
            if ((offset + count) * 8 > blob.size()) throw fail("array " + name + " runs past the end of the data");
            for (std::size_t i = 0; i < count; ++i) {
                std::uint64_t bits = 0;
                std::memcpy(&bits, blob.data() + (offset + i) * 8, 8);
                v->value.data[i] = std::bit_cast<double>(to_le(bits));
            }
            ++loaded;
        } else {
            throw fail("unknown key " + key);
        }
    }
    if (loaded != slots.size()) throw Error(ErrorKind::Io, prefix + ".manifest: missing arrays");
    return model;
}

}  // namespace djcm::toy
