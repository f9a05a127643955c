#include "amisr/dataset.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <iostream>
#include <set>

#include "amisr/errors.hpp"
#include "amisr/resize.hpp"
#include "amisr/synth_face.hpp"

namespace amisr {

void Manifest::validate() const {
  if (synthetic) {
    if (synthetic->count < 1) throw ConfigError("data: synthetic.count must be at least 1");
    if (synthetic->size < 32) throw ConfigError("data: synthetic.size must be at least 32");
  } else if (hr_dir.empty()) {
    throw ConfigError("data: manifest needs either hr_dir or synthetic");
  }
  if (scale != 2 && scale != 4 && scale != 8) throw ConfigError("data: scale must be 2, 4 or 8");
  if (hr_size() % scale != 0) throw ConfigError("data: image size must be divisible by scale");
  if (hr_size() / scale < 4) throw ConfigError("data: LR images would be smaller than 4 pixels");
  if (batch_size < 1) throw ConfigError("data: batch_size must be at least 1");
  if (holdout < 0) throw ConfigError("data: holdout must be non-negative");
  if (synthetic && holdout >= synthetic->count) throw ConfigError("data: holdout leaves no training samples");
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j{{"scale", m.scale},
                   {"batch_size", m.batch_size},
                   {"shuffle_seed", m.shuffle_seed},
                   {"holdout", m.holdout}};
  if (m.synthetic) {
    j["synthetic"] = {{"count", m.synthetic->count}, {"seed", m.synthetic->seed}, {"size", m.synthetic->size}};
  } else {
    j["hr_dir"] = m.hr_dir;
    j["glob"] = m.glob;
    j["size"] = m.size;
  }
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("data: expected a JSON object");
  static const std::set<std::string> known{"hr_dir", "glob",       "synthetic",    "size",
                                           "scale",  "batch_size", "shuffle_seed", "holdout"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("data: unknown key '" + key + "'");
  }
  Manifest m;
  try {
    if (j.contains("hr_dir")) m.hr_dir = j.at("hr_dir").get<std::string>();
    if (j.contains("glob")) m.glob = j.at("glob").get<std::string>();
    if (j.contains("size")) m.size = j.at("size").get<int>();
    if (j.contains("scale")) m.scale = j.at("scale").get<int>();
    if (j.contains("batch_size")) m.batch_size = j.at("batch_size").get<int>();
    if (j.contains("shuffle_seed")) m.shuffle_seed = j.at("shuffle_seed").get<uint64_t>();
    if (j.contains("holdout")) m.holdout = j.at("holdout").get<int>();
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      if (!s.is_object()) throw ConfigError("data: synthetic must be an object");
      for (const auto& [key, _] : s.items()) {
        if (key != "count" && key != "seed" && key != "size") {
          throw ConfigError("data: unknown key 'synthetic." + key + "'");
        }
      }
      SyntheticSource src;
      if (s.contains("count")) src.count = s.at("count").get<int>();
      if (s.contains("seed")) src.seed = s.at("seed").get<uint64_t>();
      if (s.contains("size")) src.size = s.at("size").get<int>();
      m.synthetic = src;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  if (m.synthetic && !m.hr_dir.empty()) throw ConfigError("data: hr_dir and synthetic are exclusive");
  m.validate();
  return m;
}

ImageBuffer degrade(const ImageBuffer& hr, int scale) {
  return bicubic_resize(hr, hr.height / scale, hr.width / scale);
}

ImageBuffer upsample_to(const ImageBuffer& lr, int64_t size) { return bicubic_resize(lr, size, size); }

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir, const std::string& pattern) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (fnmatch(pattern.c_str(), entry.path().filename().c_str(), 0) == 0) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Sample make_sample(std::string name, ImageBuffer hr, int scale) {
  const int64_t size = hr.height;
  ImageBuffer lr_up = upsample_to(degrade(hr, scale), size);
  return {std::move(name), std::move(hr), std::move(lr_up)};
}

}  // namespace

Dataset::Dataset(const Manifest& manifest) : manifest_(manifest) {
  manifest_.validate();
  std::vector<Sample> all;
  if (manifest_.synthetic) {
    const SyntheticSource& s = *manifest_.synthetic;
    for (int i = 0; i < s.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "face_%05d", i);
      all.push_back(make_sample(name, synth_face(Rng::mix(s.seed * 0x100000001b3ULL + static_cast<uint64_t>(i)), s.size),
                                manifest_.scale));
    }
  } else {
    for (const auto& path : list_images(manifest_.hr_dir, manifest_.glob)) {
      try {
        ImageBuffer img = center_crop_square(read_png(path));
        if (img.height != manifest_.size) img = bicubic_resize(img, manifest_.size, manifest_.size);
        all.push_back(make_sample(path.stem().string(), std::move(img), manifest_.scale));
      } catch (const Error& e) {
        std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
        ++skipped_;
      }
    }
  }
  if (static_cast<int>(all.size()) <= manifest_.holdout) {
    throw ConfigError("data: " + std::to_string(all.size()) + " usable samples leave nothing to train on after holdout " +
                      std::to_string(manifest_.holdout));
  }
  const size_t split = all.size() - static_cast<size_t>(manifest_.holdout);
  train_.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(split)));
  holdout_.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(split)), std::make_move_iterator(all.end()));
}

BatchStream::BatchStream(const std::vector<Sample>& samples, int batch_size, uint64_t shuffle_seed)
    : samples_(samples), batch_size_(batch_size), shuffle_seed_(shuffle_seed) {
  if (samples_.empty()) throw ConfigError("batch stream over an empty sample set");
  if (batch_size_ < 1) throw ConfigError("batch size must be at least 1");
}

void BatchStream::refill() {
  ++epoch_;
  order_.resize(samples_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  // Fisher-Yates with the library Rng so the order is platform independent.
  Rng rng = Rng(shuffle_seed_).split(static_cast<uint64_t>(epoch_));
  for (size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
  cursor_ = 0;
}

std::vector<size_t> BatchStream::next_indices() {
  std::vector<size_t> out;
  while (static_cast<int>(out.size()) < batch_size_) {
    if (cursor_ >= order_.size()) refill();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

template <typename T>
Batch<T> make_batch(const std::vector<Sample>& samples, const std::vector<size_t>& indices) {
  std::vector<ImageBuffer> lr, hr;
  for (size_t i : indices) {
    lr.push_back(samples.at(i).lr_up);
    hr.push_back(samples.at(i).hr);
  }
  return {images_to_tensor<T>(lr), images_to_tensor<T>(hr), indices};
}

template <typename T>
Batch<T> BatchStream::next() {
  return make_batch<T>(samples_, next_indices());
}

template Batch<float> make_batch(const std::vector<Sample>&, const std::vector<size_t>&);
template Batch<double> make_batch(const std::vector<Sample>&, const std::vector<size_t>&);
template Batch<float> BatchStream::next<float>();
template Batch<double> BatchStream::next<double>();

}  // namespace amisr
