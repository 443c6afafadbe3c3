#include "ccrcnn/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.backbone = BackboneConfig::desk();
  c.head = HeadConfig::desk();
  c.segment_length = 16384;
  return c;
}

void ModelConfig::validate() const {
  backbone.validate();
  head.validate(backbone.num_scales);
  loss.validate();
  const std::size_t multiple = backbone.largest_stride();
  if (segment_length == 0 || segment_length % multiple != 0) {
    throw ConfigError("segment length " + std::to_string(segment_length) +
                      " must be a positive multiple of " +
                      std::to_string(multiple));
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw ConfigError("overlap must be in [0,1)");
  }
}

template <typename T>
Detector<T>::Detector(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t p = config_.backbone.proposal_feature_dim;
  backbone_ = std::make_unique<Backbone<T>>(config_.backbone);
  if (config_.head.contextual) {
    context_ = std::make_unique<ContextualBlock<T>>(
        p, config_.head.dilations, config_.backbone.bn_momentum,
        config_.backbone.bn_epsilon);
  }
  heads_ = std::make_unique<SiblingHeads<T>>(p);
}

template <typename T>
void Detector<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  backbone_->init(rng);
  if (context_) context_->init(rng);
  heads_->init(rng, 0.01);
}

template <typename T>
typename Detector<T>::Outputs Detector<T>::forward(nn::Tape<T>& tape, Id input) {
  const std::size_t first = config_.first_active_scale();
  const std::size_t end = config_.end_active_scale();
  std::vector<Id> features = backbone_->forward(tape, input, end);
  features.erase(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(first));

  Outputs out;
  std::size_t row = 0;
  for (std::size_t s = first; s < end; ++s) {
    const std::size_t len = tape.value(features[s - first]).length();
    out.scales.push_back(s);
    out.row_offset.push_back(row);
    out.lengths.push_back(len);
    row += len;
  }
  Id stacked = 0;
  if (context_) {
    stacked = context_->forward_stacked(tape, features);
  } else {
    stacked = features.size() == 1 ? features[0] : tape.concat_time(features);
  }
  std::tie(out.logits, out.offsets) = heads_->forward(tape, stacked);
  return out;
}

template <typename T>
std::vector<ScalePrediction> Detector<T>::predict(std::span<const float> segment) {
  nn::Tape<T> tape(nn::Mode::kInfer);
  nn::Tensor<T> x(segment.size(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) x(i, 0) = static_cast<T>(segment[i]);
  const Id input = tape.constant(std::move(x));
  const Outputs out = forward(tape, input);
  const nn::Tensor<T>& logits = tape.value(out.logits);
  const nn::Tensor<T>& offsets = tape.value(out.offsets);
  std::vector<ScalePrediction> preds;
  for (std::size_t i = 0; i < out.scales.size(); ++i) {
    ScalePrediction p;
    p.scale_index = out.scales[i];
    p.stride = config_.backbone.scale_stride(p.scale_index);
    p.anchor_size = config_.head.anchor_sizes[p.scale_index];
    p.logits.resize(out.lengths[i]);
    p.offsets.resize(2 * out.lengths[i]);
    for (std::size_t j = 0; j < out.lengths[i]; ++j) {
      const std::size_t r = out.row_offset[i] + j;
      p.logits[j] = static_cast<double>(logits(r, 0));
      p.offsets[2 * j] = static_cast<double>(offsets(r, 0));
      p.offsets[2 * j + 1] = static_cast<double>(offsets(r, 1));
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

template <typename T>
std::vector<Detection> Detector<T>::detect_segment(std::span<const float> segment) {
  const auto preds = predict(segment);
  return detect(preds, segment.size(), config_.head);
}

template <typename T>
nn::ParamCollector<T> Detector<T>::parameters() {
  nn::ParamCollector<T> out;
  backbone_->collect(out);
  if (context_) context_->collect(out);
  heads_->collect(out);
  return out;
}

template <typename T>
std::size_t Detector<T>::parameter_count() const {
  std::size_t n = backbone_->parameter_count() + heads_->parameter_count();
  if (context_) n += context_->parameter_count();
  return n;
}

template class Detector<float>;
template class Detector<double>;

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[4] = {'C', 'C', 'R', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }
  void read(void* dst, std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw DataError(path_.string() + ": truncated checkpoint reading " +
                      what + " at byte " + std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    read(&v, sizeof v, what);
    return v;
  }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw DataError(path_.string() + ": " + msg + " at byte " +
                    std::to_string(at));
  }

 private:
  std::filesystem::path path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const nn::ParamCollector<float>& params) {
  const auto all = params.all();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(all.size()));
  for (const auto& p : all) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

void load_checkpoint(const std::filesystem::path& path,
                     nn::ParamCollector<float>& params) {
  Reader r(path);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic", 0);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version), version_at);
  }
  auto all = params.all();
  std::map<std::string, nn::ParamRef<float>*> by_name;
  for (auto& p : all) by_name[p.name] = &p;
  const std::uint32_t count = r.u32("array count");
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len > 4096) r.fail("implausible name length", at);
    std::string name(name_len, '\0');
    r.read(name.data(), name_len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) r.fail("implausible rank for " + name, at);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32("dims");
      n *= d;
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) r.fail("unknown array '" + name + "'", at);
    nn::ParamRef<float>& dst = *it->second;
    if (shape != dst.shape || n != dst.value.size()) {
      r.fail("shape mismatch for '" + name + "'", at);
    }
    r.read(dst.value.data(), n * sizeof(float), name.c_str());
    seen[name] = true;
  }
  for (const auto& p : all) {
    if (!seen.count(p.name)) {
      throw DataError(path.string() + ": missing array '" + p.name + "'");
    }
  }
  if (!r.done()) r.fail("trailing bytes", r.offset());
}

}  // namespace ccrcnn
