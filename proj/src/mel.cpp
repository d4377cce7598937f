#include "moodshift/mel.hpp"

#include <cstring>
#include <fstream>
#include <string>

#include "moodshift/binary_io.hpp"
#include "moodshift/error.hpp"

namespace moodshift {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
    }
}

MelSpectrogram::MelSpectrogram(Matrix values, double frame_rate)
    : values_(std::move(values)), frame_rate_(frame_rate) {
    if (values_.rows() < 1 || values_.cols() < 1) {
        throw ContractError("mel spectrogram must have at least one bin and one frame");
    }
    if (!values_.allFinite()) {
        throw ContractError("mel spectrogram contains non-finite values");
    }
}

namespace {
constexpr char kMelMagic[8] = {'M', 'S', 'M', 'E', 'L', '0', '0', '1'};
}

void write_mel_file(const std::filesystem::path& path, const MelSpectrogram& mel) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    BinaryWriter w(os);
    w.bytes(kMelMagic, sizeof kMelMagic);
    w.u32(static_cast<std::uint32_t>(mel.n_mels()));
    w.u32(static_cast<std::uint32_t>(mel.frames()));
    w.f64(mel.frame_rate());
    w.bytes(mel.values().data(), sizeof(double) * static_cast<std::size_t>(mel.values().size()));
    if (!os) throw IoError("failed writing " + path.string());
}

MelSpectrogram read_mel_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    BinaryReader r(is, path.string());
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMelMagic, sizeof magic) != 0) throw FormatError(path.string() + " is not a mel file");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows == 0 || cols == 0 || static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
        throw FormatError(path.string() + ": implausible mel shape");
    }
    const double frame_rate = r.f64();
    Matrix values(rows, cols);
    r.bytes(values.data(), sizeof(double) * static_cast<std::size_t>(values.size()));
    try {
        return MelSpectrogram(std::move(values), frame_rate);
    } catch (const ContractError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace moodshift
