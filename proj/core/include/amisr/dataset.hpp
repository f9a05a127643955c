#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "amisr/image.hpp"
#include "amisr/rng.hpp"
#include "amisr/tensor.hpp"

namespace amisr {

struct SyntheticSource {
  int count = 8;
  uint64_t seed = 1;
  int size = 128;
  bool operator==(const SyntheticSource&) const = default;
};

// Either a directory of HR PNGs or a synthetic generator.
struct Manifest {
  std::string hr_dir;
  std::string glob = "*.png";
  std::optional<SyntheticSource> synthetic;
  // HR edge length that directory images are cropped and resized to.
  int size = 128;
  int scale = 8;
  int batch_size = 1;
  uint64_t shuffle_seed = 0;
  // Trailing samples (in filename / generation order) kept out of training.
  int holdout = 0;

  int hr_size() const { return synthetic ? synthetic->size : size; }
  void validate() const;
  bool operator==(const Manifest&) const = default;
};

nlohmann::json to_json(const Manifest& m);
// Unknown keys are a ConfigError.
Manifest manifest_from_json(const nlohmann::json& j);

struct Sample {
  std::string name;
  ImageBuffer hr;
  // HR -> bicubic down by `scale` -> bicubic back up to HR size.
  ImageBuffer lr_up;
};

// LR image of `hr` at 1/scale size.
ImageBuffer degrade(const ImageBuffer& hr, int scale);
// Bicubic back to `size` x `size`.
ImageBuffer upsample_to(const ImageBuffer& lr, int64_t size);

class Dataset {
 public:
  // Loads or generates every sample. Unreadable files are skipped with a
  // warning on stderr and counted. Throws ConfigError when nothing remains.
  explicit Dataset(const Manifest& manifest);

  const Manifest& manifest() const { return manifest_; }
  const std::vector<Sample>& train() const { return train_; }
  const std::vector<Sample>& holdout() const { return holdout_; }
  int skipped() const { return skipped_; }

 private:
  Manifest manifest_;
  std::vector<Sample> train_;
  std::vector<Sample> holdout_;
  int skipped_ = 0;
};

template <typename T>
struct Batch {
  Tensor<T> lr_up;
  Tensor<T> hr;
  std::vector<size_t> indices;
};

// Endless stream over the training split. Each epoch is a fresh permutation
// drawn from the shuffle seed; batches run across epoch boundaries, so every
// epoch visits each sample exactly once.
class BatchStream {
 public:
  BatchStream(const std::vector<Sample>& samples, int batch_size, uint64_t shuffle_seed);

  std::vector<size_t> next_indices();

  template <typename T>
  Batch<T> next();

  int64_t epoch() const { return epoch_; }

 private:
  void refill();

  const std::vector<Sample>& samples_;
  int batch_size_;
  uint64_t shuffle_seed_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  int64_t epoch_ = -1;
};

template <typename T>
Batch<T> make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices);

// Sorted file paths in `dir` whose filename matches `pattern`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir, const std::string& pattern);

}  // namespace amisr
