#pragma once

// Binary checkpoint container: magic "XGCK", u32 version, length-prefixed
// UTF-8 config text, u32 tensor count, then per tensor a length-prefixed
// name, u32 rank, u32 dims, and raw 32-bit little-endian scalars. Every
// integer is little-endian. Save -> load -> save is byte-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "xing/tensor.hpp"

namespace xing {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NamedTensor {
    std::string name;
    Tensor<float> t;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config_text;  // kept verbatim across round trips
    std::vector<NamedTensor> tensors;

    const Tensor<float>* find(const std::string& name) const {
        for (const NamedTensor& nt : tensors)
            if (nt.name == name) return &nt.t;
        return nullptr;
    }
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace xing
