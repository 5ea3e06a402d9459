// IDX container reader (the MNIST distribution format): big-endian 32-bit
// magic, big-endian 32-bit dimension sizes, then raw unsigned bytes.

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/problems.hpp"

namespace airdfl {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw FormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (read_be32(bytes, 0, path) != kImagesMagic) {
    throw FormatError("bad IDX image magic in " + path.string());
  }
  IdxImages out{read_be32(bytes, 4, path), read_be32(bytes, 8, path), read_be32(bytes, 12, path), {}};
  const std::size_t payload = out.count * out.rows * out.cols;
  if (bytes.size() < 16 + payload) throw FormatError("truncated IDX image payload in " + path.string());
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (read_be32(bytes, 0, path) != kLabelsMagic) {
    throw FormatError("bad IDX label magic in " + path.string());
  }
  const std::size_t count = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + count) throw FormatError("truncated IDX label payload in " + path.string());
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

TrainTestSplit load_idx_binary_pair(const std::filesystem::path& images,
                                    const std::filesystem::path& labels, int class_a, int class_b,
                                    std::size_t train_count, std::size_t test_count) {
  if (class_a == class_b) throw InvalidInput("binary classes must differ");
  const IdxImages img = read_idx_images(images);
  const std::vector<std::uint8_t> lab = read_idx_labels(labels);
  if (img.count != lab.size()) throw FormatError("image and label counts differ");
  const std::size_t dim = img.rows * img.cols;
  if (dim == 0) throw FormatError("IDX images have zero size");

  TrainTestSplit out{Dataset(dim), Dataset(dim)};
  std::vector<double> a(dim);
  for (std::size_t n = 0; n < img.count; ++n) {
    if (out.train.size() == train_count && out.test.size() == test_count) break;
    const int cls = lab[n];
    if (cls != class_a && cls != class_b) continue;
    const std::uint8_t* px = img.pixels.data() + n * dim;
    for (std::size_t k = 0; k < dim; ++k) a[k] = static_cast<double>(px[k]) / 255.0;
    const double norm = std::sqrt(vec::squared_norm(a));
    if (norm == 0.0) throw FormatError("blank image cannot be normalized (record " + std::to_string(n) + ")");
    for (auto& x : a) x /= norm;
    const double b = cls == class_a ? 1.0 : -1.0;
    if (out.train.size() < train_count) out.train.add(a, b);
    else out.test.add(a, b);
  }
  if (out.train.size() < train_count || out.test.size() < test_count) {
    throw InvalidInput("IDX files hold only " + std::to_string(out.train.size() + out.test.size()) +
                       " samples of classes " + std::to_string(class_a) + "/" +
                       std::to_string(class_b) + ", need " +
                       std::to_string(train_count + test_count));
  }
  return out;
}

}  // namespace airdfl
