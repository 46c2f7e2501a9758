#include "phong_splat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace phong_splat {

namespace {

template <class U>
void put_le(std::vector<unsigned char>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(value >> (8 * i)));
}

template <class U>
U get_le(const unsigned char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 8;
constexpr std::size_t kRecordBytes = GaussianPoint::kAttributeCount * 4;

}  // namespace

std::vector<unsigned char> encode_checkpoint(const std::vector<GaussianPoint>& points) {
    std::vector<unsigned char> out;
    out.reserve(kHeaderBytes + points.size() * kRecordBytes);
    out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, points.size());
    for (const GaussianPoint& p : points) {
        for (float v : p.flatten()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

std::vector<GaussianPoint> decode_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < kHeaderBytes) throw CheckpointError("checkpoint truncated: header incomplete");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw CheckpointError("checkpoint has bad magic");
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    const auto count = get_le<std::uint64_t>(bytes.data() + 8);
    if (count > (bytes.size() - kHeaderBytes) / kRecordBytes || bytes.size() != kHeaderBytes + count * kRecordBytes) {
        throw CheckpointError("checkpoint truncated: expected " + std::to_string(count) + " records");
    }
    std::vector<GaussianPoint> points;
    points.reserve(count);
    const unsigned char* p = bytes.data() + kHeaderBytes;
    std::array<float, GaussianPoint::kAttributeCount> record{};
    for (std::uint64_t i = 0; i < count; ++i) {
        for (float& v : record) {
            v = std::bit_cast<float>(get_le<std::uint32_t>(p));
            p += 4;
        }
        points.push_back(GaussianPoint::unflatten(record));
    }
    return points;
}

void save_checkpoint(const std::vector<GaussianPoint>& points, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(points);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

std::vector<GaussianPoint> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace phong_splat
