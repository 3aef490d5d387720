#include "synthetic.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flim/png_io.hpp"
#include "random.hpp"

namespace flim::test {

namespace {

struct Disk {
  double ci, cj, r;
};

bool inside(const Disk& d, double i, double j, double pad = 0.0) {
  return (i - d.ci) * (i - d.ci) + (j - d.cj) * (j - d.cj) <= (d.r + pad) * (d.r + pad);
}

}  // namespace

BlobSample make_blob_sample(std::uint64_t seed, const std::string& name, int size, int channels) {
  Rng rng(seed);
  BlobSample s{name, Image(size, size, channels), Image(size, size, 1), {size, size, {}}};
  s.markers.values.assign(static_cast<std::size_t>(size) * size, 0);

  // One or two disks, apart from each other and from the border.
  std::vector<Disk> disks;
  const int want = rng.integer(1, 2);
  for (int attempt = 0; static_cast<int>(disks.size()) < want && attempt < 200; ++attempt) {
    const double r = size * rng.uniform(0.2, 0.26);
    const Disk d{rng.uniform(r + 3, size - r - 4), rng.uniform(r + 3, size - r - 4), r};
    bool clear = true;
    for (const Disk& o : disks) {
      clear &= std::hypot(o.ci - d.ci, o.cj - d.cj) > o.r + d.r + 6;
    }
    if (clear) disks.push_back(d);
  }

  const double phase = rng.uniform(0.0, 6.28);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      bool object = false;
      for (const Disk& d : disks) object |= inside(d, i, j);
      s.gt.at(i, j) = object ? 1.0 : 0.0;
      const double texture = 0.06 * std::sin(0.7 * i + phase) * std::cos(0.5 * j);
      for (int b = 0; b < channels; ++b) {
        const double base = object ? 0.78 + 0.04 * b : 0.22 + 0.03 * b;
        s.image.at(i, j, b) = std::clamp(base + texture + rng.uniform(-0.05, 0.05), 0.0, 1.0);
      }
    }
  }

  auto mark = [&](int i, int j, std::uint8_t v) {
    s.markers.values[static_cast<std::size_t>(i) * size + j] = v;
  };
  // Object scribbles: two horizontal strokes across each disk, above and
  // below the centre.
  for (const Disk& d : disks) {
    const int half = static_cast<int>(d.r * 0.5);
    const int cj = static_cast<int>(std::lround(d.cj));
    for (const double off : {-0.4, 0.4}) {
      const int i = static_cast<int>(std::lround(d.ci + off * d.r));
      for (int j = cj - half; j <= cj + half; ++j) mark(i, j, 2);
    }
  }
  // Background scribbles: strokes along three rows, away from the image border
  // and at least 6 px clear of every disk.
  for (int i : {6, size / 2, size - 7}) {
    int run_start = -1;
    for (int j = 6; j <= size - 6; ++j) {
      bool clear = j < size - 6;
      for (const Disk& d : disks) clear &= !inside(d, i, j, 6.0);
      if (clear && run_start < 0) run_start = j;
      if (!clear && run_start >= 0) {
        if (j - run_start >= 6) {
          for (int k = run_start; k < j; ++k) mark(i, k, 1);
        }
        run_start = -1;
      }
    }
  }
  return s;
}

std::vector<BlobSample> make_blob_corpus(std::size_t count, std::uint64_t seed, int size, int channels) {
  std::vector<BlobSample> out;
  for (std::size_t k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "blob%02zu.png", k);
    out.push_back(make_blob_sample(seed * 1000 + k, name, size, channels));
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<BlobSample>& samples) {
  for (const char* sub : {"images", "markers", "gt"}) std::filesystem::create_directories(dir / sub);
  for (const BlobSample& s : samples) {
    write_file(dir / "images" / s.name, encode_png(s.image));
    write_file(dir / "markers" / s.name, encode_label_png(s.markers));
    write_file(dir / "gt" / s.name, encode_gray_png(s.gt));
  }
}

ArchitectureSpec blob_architecture(int channels) {
  ArchitectureSpec arch;
  arch.input_channels = channels;
  LayerSpec l1;
  l1.kernel_size = 3;
  l1.n_kernels = 8;
  l1.per_marker = 4;
  l1.pool_kind = PoolKind::max;
  l1.pool_size = 3;
  l1.pool_stride = 2;
  LayerSpec l2 = l1;
  l2.n_kernels = 8;
  l2.pool_kind = PoolKind::avg;
  arch.layers = {l1, l2};
  return arch;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("flim-test-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flim::test
