#include "xing/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace xing {

namespace {

constexpr char kMagic[4] = {'X', 'G', 'C', 'K'};
constexpr std::size_t kMaxTensorElems = 1u << 30;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k, const char* what) const {
        if (off + k > n)
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(off) +
                                  " while reading " + what + " (need " + std::to_string(k) +
                                  " bytes, have " + std::to_string(n - off) + ")");
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = static_cast<std::uint32_t>(p[off]) |
                          (static_cast<std::uint32_t>(p[off + 1]) << 8) |
                          (static_cast<std::uint32_t>(p[off + 2]) << 16) |
                          (static_cast<std::uint32_t>(p[off + 3]) << 24);
        off += 4;
        return v;
    }
    std::string str(std::size_t k, const char* what) {
        need(k, what);
        std::string s(reinterpret_cast<const char*>(p + off), k);
        off += k;
        return s;
    }
};

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, ck.version);
    put_u32(out, static_cast<std::uint32_t>(ck.config_text.size()));
    out.insert(out.end(), ck.config_text.begin(), ck.config_text.end());
    put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const NamedTensor& nt : ck.tensors) {
        put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
        out.insert(out.end(), nt.name.begin(), nt.name.end());
        put_u32(out, static_cast<std::uint32_t>(nt.t.rank()));
        for (int d : nt.t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (float v : nt.t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes) {
    Reader r{bytes.data(), bytes.size()};
    r.need(4, "magic");
    if (std::memcmp(r.p, kMagic, 4) != 0)
        throw CheckpointError("checkpoint magic mismatch at byte 0: expected \"XGCK\"");
    r.off = 4;

    Checkpoint ck;
    std::size_t version_at = r.off;
    ck.version = r.u32("version");
    if (ck.version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version) +
                              " at byte " + std::to_string(version_at) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");

    std::uint32_t cfg_len = r.u32("config length");
    ck.config_text = r.str(cfg_len, "config text");

    std::uint32_t n_tensors = r.u32("tensor count");
    ck.tensors.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        NamedTensor nt;
        std::uint32_t name_len = r.u32("tensor name length");
        nt.name = r.str(name_len, "tensor name");
        std::size_t rank_at = r.off;
        std::uint32_t rank = r.u32("tensor rank");
        if (rank < 1 || rank > kMaxRank)
            throw CheckpointError("implausible tensor rank " + std::to_string(rank) +
                                  " at byte " + std::to_string(rank_at) + " for \"" + nt.name +
                                  "\"");
        std::vector<int> shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::size_t dim_at = r.off;
            std::uint32_t dim = r.u32("tensor dim");
            numel *= dim;
            if (dim == 0 || numel > kMaxTensorElems)
                throw CheckpointError("implausible tensor shape at byte " +
                                      std::to_string(dim_at) + " for \"" + nt.name + "\"");
            shape.push_back(static_cast<int>(dim));
        }
        std::vector<float> data(numel);
        for (std::size_t k = 0; k < numel; ++k)
            data[k] = std::bit_cast<float>(r.u32("tensor data"));
        nt.t = Tensor<float>(std::move(shape), std::move(data));
        ck.tensors.push_back(std::move(nt));
    }
    if (r.off != r.n)
        throw CheckpointError("checkpoint has " + std::to_string(r.n - r.off) +
                              " trailing bytes at byte " + std::to_string(r.off));
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::vector<unsigned char> bytes = serialize_checkpoint(ck);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open checkpoint for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

}  // namespace xing
