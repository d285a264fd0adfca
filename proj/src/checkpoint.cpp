#include "hlstm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "hlstm/errors.hpp"
#include "hlstm/rng.hpp"

namespace hlstm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'H', 'L', 'S', 'T', 'M', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

class Reader {
public:
    Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    template <typename T>
    T get() {
        T value{};
        bytes(reinterpret_cast<char*>(&value), sizeof value);
        return value;
    }

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(path_ + ": truncated checkpoint");
    }

    std::string string(std::uint64_t n, std::uint64_t limit) {
        if (n > limit) throw FormatError(path_ + ": implausible string length in checkpoint");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

    const std::string& path() const { return path_; }

private:
    std::istream& in_;
    std::string path_;
};

struct Stored {
    ModelConfig config;
    std::map<std::string, Tensor> tensors;
};

Stored read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path, "cannot open for reading");
    Reader r(in, path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError(path + ": not a checkpoint file");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    Stored s;
    const std::string config_text = r.string(r.get<std::uint64_t>(), 1u << 20);
    try {
        s.config = config_from_json_string(config_text);
    } catch (const ConfigError& e) {
        throw FormatError(path + ": stored config: " + e.what());
    }
    const auto count = r.get<std::uint64_t>();
    if (count > 100000) throw FormatError(path + ": implausible tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.string(r.get<std::uint32_t>(), 4096);
        const auto rank = r.get<std::uint32_t>();
        if (rank > 8) throw FormatError(path + ": tensor " + name + " has implausible rank");
        Shape shape(rank);
        std::uint64_t elements = 1;
        for (auto& dim : shape) {
            dim = static_cast<std::size_t>(r.get<std::uint64_t>());
            elements *= dim;
            if (elements > (std::uint64_t{1} << 32)) throw FormatError(path + ": tensor " + name + " is implausibly large");
        }
        Tensor t(shape);
        r.bytes(reinterpret_cast<char*>(t.raw()), t.size() * sizeof(double));
        if (!s.tensors.emplace(std::move(name), std::move(t)).second) {
            throw FormatError(path + ": duplicate tensor name");
        }
    }
    return s;
}

HLstmModel assemble(const std::string& path, const ModelConfig& config, std::map<std::string, Tensor>& tensors) {
    Rng rng(0);
    Parameters params = Parameters::zeros_like(Parameters::init(config, rng));
    std::size_t used = 0;
    params.for_each([&](const std::string& name, ParamGroup, Tensor& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ShapeMismatchError(path + ": checkpoint has no tensor '" + name + "'");
        if (!it->second.same_shape(t)) {
            throw ShapeMismatchError(path + ": tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                                     " but the config needs " + shape_string(t.shape()));
        }
        t = std::move(it->second);
        ++used;
    });
    if (used != tensors.size()) {
        throw ShapeMismatchError(path + ": checkpoint holds tensors the config does not use");
    }
    return HLstmModel(config, std::move(params));
}

}  // namespace

void save_checkpoint(const std::string& path, const HLstmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError(path, "cannot open for writing");
    out.write(kMagic, 8);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string config = to_json_string(model.config(), -1);
    put<std::uint64_t>(out, config.size());
    out.write(config.data(), static_cast<std::streamsize>(config.size()));

    std::uint64_t count = 0;
    model.params().for_each([&](const std::string&, ParamGroup, const Tensor&) { ++count; });
    put<std::uint64_t>(out, count);
    model.params().for_each([&](const std::string& name, ParamGroup, const Tensor& t) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t dim : t.shape()) put<std::uint64_t>(out, dim);
        out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    out.flush();
    if (!out) throw FileError(path, "write failed");
}

HLstmModel load_checkpoint(const std::string& path) {
    Stored s = read_container(path);
    return assemble(path, s.config, s.tensors);
}

HLstmModel load_checkpoint(const std::string& path, const ModelConfig& expected) {
    Stored s = read_container(path);
    return assemble(path, expected, s.tensors);
}

}  // namespace hlstm
