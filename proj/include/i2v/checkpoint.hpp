#pragma once

// Checkpoint container, little-endian:
//
//   magic      8 bytes  "I2VCKPT\0"
//   version    u32      kCheckpointVersion
//   header     u64 length + UTF-8 JSON  {"arch": {...}, "dtype": "f32"|"f64", ...}
//   count      u32
//   tensors    count x { u32 name length, name, u8 dtype (1 = f32, 2 = f64),
//                        u32 rank, rank x u32 dims, raw values }
//   crc        u32      zlib crc32 of every preceding byte
//
// Generator tensors are named e<i>.l<level>.{w,b,gamma,beta} and
// d.s<stage>.{...}, d.head.{w,b}; discriminators dg.* and dl.*. Training
// checkpoints add Adam moments as adam.m.<name> / adam.v.<name> and a
// "train_state" header block.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2v/model.hpp"

namespace i2v::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
    std::string name;
    std::vector<int> shape;
    bool is_double = false;
    std::vector<std::uint8_t> bytes;

    template <typename T>
    static StoredTensor from(std::string name, const Tensor<T>& t);
    // Converts to T; precision changes only when the stored dtype differs.
    template <typename T>
    Tensor<T> as() const;
};

struct CheckpointFile {
    nlohmann::json header;
    std::vector<StoredTensor> tensors;

    const StoredTensor* find(const std::string& name) const;
};

// Writes through a temporary file and renames, so a failed write never
// leaves a half-written checkpoint under `path`.
void write_checkpoint(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

template <typename T>
const char* dtype_name();

template <typename T>
CheckpointFile model_checkpoint(const Model<T>& model);
// Copies every generator/discriminator tensor into `model`; the stored
// architecture must equal model.arch.
template <typename T>
void restore_model(Model<T>& model, const CheckpointFile& file);

template <typename T>
void save_params(const Model<T>& model, const std::filesystem::path& path);
template <typename T>
void load_params(Model<T>& model, const std::filesystem::path& path);
// Builds the model from the checkpoint's own architecture block.
template <typename T>
Model<T> load_model(const std::filesystem::path& path);

ArchConfig checkpoint_arch(const CheckpointFile& file);

}  // namespace i2v::model
