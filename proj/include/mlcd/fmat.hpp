#ifndef MLCD_FMAT_HPP
#define MLCD_FMAT_HPP

#include <filesystem>
#include <string>

#include "mlcd/tensor.hpp"

namespace mlcd {

// FMAT layout: "MLCDMAT1", u32 rows, u32 cols, u8 normalized, 3 zero bytes,
// then rows*cols f32. All integers and floats little-endian.
inline constexpr char kFmatMagic[8] = {'M', 'L', 'C', 'D', 'M', 'A', 'T', '1'};
inline constexpr std::size_t kFmatHeaderSize = 20;

std::string encode_fmat(const FeatureMatrix& m);
FeatureMatrix decode_fmat(const std::string& bytes, const std::string& source = "<memory>");

void write_fmat(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_fmat(const std::filesystem::path& path);

// Shared helpers for the binary formats.
std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace mlcd

#endif  // MLCD_FMAT_HPP
