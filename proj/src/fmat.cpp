#include "mlcd/fmat.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "mlcd/binary_io.hpp"

namespace mlcd {

std::string encode_fmat(const FeatureMatrix& m) {
    if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::Format, "matrix too large for FMAT");
    }
    std::string out(kFmatMagic, sizeof(kFmatMagic));
    out.reserve(kFmatHeaderSize + 4 * m.data().size());
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.push_back(m.normalized() ? 1 : 0);
    out.append(3, '\0');
    for (float v : m.data()) detail::put_f32(out, v);
    return out;
}

FeatureMatrix decode_fmat(const std::string& bytes, const std::string& source) {
    detail::ByteReader in(bytes, source);
    if (bytes.size() < sizeof(kFmatMagic) || in.take(sizeof(kFmatMagic)) != std::string(kFmatMagic, sizeof(kFmatMagic))) {
        in.fail("bad magic, expected MLCDMAT1");
    }
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    const std::uint8_t flag = in.u8();
    if (flag > 1) in.fail("normalized flag must be 0 or 1");
    for (int i = 0; i < 3; ++i) {
        if (in.u8() != 0) in.fail("reserved header bytes must be zero");
    }
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    if (in.remaining() != 4 * count) {
        in.fail("payload holds " + std::to_string(in.remaining()) + " bytes, expected " + std::to_string(4 * count));
    }
    std::vector<float> data(count);
    for (auto& v : data) v = in.f32();
    try {
        return FeatureMatrix(rows, cols, std::move(data), flag == 1);
    } catch (const Error& e) {
        in.fail(e.what());
    }
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void write_fmat(const std::filesystem::path& path, const FeatureMatrix& m) { write_file_bytes(path, encode_fmat(m)); }

FeatureMatrix read_fmat(const std::filesystem::path& path) { return decode_fmat(read_file_bytes(path), path.string()); }

}  // namespace mlcd
