// SPDX-License-Identifier: Apache-2.0
#include <synctva/dataio.hpp>
#include <synctva/errors.hpp>
#include <synctva/rng.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <utility>
#include <memory>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace synctva {

const char *modality_name(Modality m) {
  switch (m) {
  case Modality::Text:
    return "text";
  case Modality::Audio:
    return "audio";
  case Modality::Visual:
    return "visual";
  }
  return "?";
}

std::size_t ModalityDims::of(Modality m) const {
  switch (m) {
  case Modality::Text:
    return text;
  case Modality::Audio:
    return audio;
  case Modality::Visual:
    return visual;
  }
  return 0;
}

const Matrix &Conversation::features(Modality m) const {
  switch (m) {
  case Modality::Text:
    return text;
  case Modality::Audio:
    return audio;
  default:
    return visual;
  }
}

Matrix &Conversation::features(Modality m) {
  return const_cast<Matrix &>(std::as_const(*this).features(m));
}

std::size_t FeatureSet::utterance_count() const {
  std::size_t n = 0;
  for (const auto &c : conversations)
    n += c.size();
  return n;
}

void FeatureSet::validate() const {
  using K = DataError::Kind;
  if (class_names.size() < 2)
    throw DataError(K::Malformed, "dataset needs at least 2 classes");
  for (const auto &c : conversations) {
    if (c.size() == 0)
      throw DataError(K::Malformed, "conversation '" + c.id + "' has no utterances");
    for (Modality m : kModalities) {
      const Matrix &f = c.features(m);
      if (f.rows != c.size() || f.cols != dims.of(m) || f.data.size() != f.rows * f.cols)
        throw DataError(K::DimMismatch, "conversation '" + c.id + "' " + modality_name(m) +
                                          " features are " + std::to_string(f.rows) + "x" +
                                          std::to_string(f.cols) + ", expected " +
                                          std::to_string(c.size()) + "x" +
                                          std::to_string(dims.of(m)));
    }
    for (int l : c.labels)
      if (l < 0 || static_cast<std::size_t>(l) >= class_names.size())
        throw DataError(K::LabelOutOfRange, "conversation '" + c.id + "' label " +
                                              std::to_string(l) + " outside [0, " +
                                              std::to_string(class_names.size()) + ")");
  }
}

Matrix l2_normalize_rows(Matrix m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double *row = m.data.data() + r * m.cols;
    double sq = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c)
      sq += row[c] * row[c];
    const double norm = std::sqrt(sq);
    if (norm == 0.0 || std::abs(norm - 1.0) <= 1e-12)
      continue;
    for (std::size_t c = 0; c < m.cols; ++c)
      row[c] /= norm;
  }
  return m;
}

void write_f64_blob(const fs::path &path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char *>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      std::reverse(std::begin(bytes), std::end(bytes));
      out.write(bytes, sizeof bytes);
    }
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> read_f64_blob(const fs::path &path, std::size_t expected) {
  using K = DataError::Kind;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw DataError(K::MissingBlob, "missing blob '" + path.string() + "'");
  const auto bytes = fs::file_size(path, ec);
  if (ec)
    throw IoError("cannot stat '" + path.string() + "': " + ec.message());
  const auto want = expected * sizeof(double);
  if (bytes < want)
    throw DataError(K::TruncatedBlob, "blob '" + path.string() + "' holds " +
                                        std::to_string(bytes) + " bytes, expected " +
                                        std::to_string(want));
  if (bytes > want)
    throw DataError(K::DimMismatch, "blob '" + path.string() + "' holds " +
                                      std::to_string(bytes) + " bytes, expected " +
                                      std::to_string(want));
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  std::vector<double> values(expected);
  in.read(reinterpret_cast<char *>(values.data()), static_cast<std::streamsize>(want));
  if (!in)
    throw IoError("read failed for '" + path.string() + "'");
  if constexpr (std::endian::native != std::endian::little) {
    for (double &v : values) {
      char b[sizeof(double)];
      std::memcpy(b, &v, sizeof v);
      std::reverse(std::begin(b), std::end(b));
      std::memcpy(&v, b, sizeof v);
    }
  }
  for (double v : values)
    if (!std::isfinite(v))
      throw DataError(K::Malformed, "non-finite value in blob '" + path.string() + "'");
  return values;
}

namespace {

fs::path manifest_file(const fs::path &p) {
  std::error_code ec;
  return fs::is_directory(p, ec) ? p / "manifest.json" : p;
}

json read_json(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw DataError(DataError::Kind::Malformed,
                    "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

} // namespace

FeatureSet load_featureset(const fs::path &manifest_path) {
  using K = DataError::Kind;
  const fs::path path = manifest_file(manifest_path);
  if (!fs::exists(path))
    throw IoError("dataset manifest '" + path.string() + "' does not exist");
  const json doc = read_json(path);
  const fs::path root = path.parent_path();
  FeatureSet out;
  try {
    if (doc.at("version").get<int>() != 1)
      throw DataError(K::Malformed, "unsupported manifest version in '" + path.string() + "'");
    const auto &dims = doc.at("dims");
    out.dims.text = dims.at("text").get<std::size_t>();
    out.dims.audio = dims.at("audio").get<std::size_t>();
    out.dims.visual = dims.at("visual").get<std::size_t>();
    out.class_names = doc.at("classes").get<std::vector<std::string>>();
    for (const auto &entry : doc.at("conversations")) {
      Conversation c;
      c.id = entry.at("id").get<std::string>();
      const auto n = entry.at("n_utterances").get<std::size_t>();
      c.labels = entry.at("labels").get<std::vector<int>>();
      if (c.labels.size() != n)
        throw DataError(K::DimMismatch, "conversation '" + c.id + "' lists " +
                                          std::to_string(c.labels.size()) + " labels for " +
                                          std::to_string(n) + " utterances");
      for (Modality m : kModalities) {
        const auto rel = entry.at("blobs").at(modality_name(m)).get<std::string>();
        auto values = read_f64_blob(root / rel, n * out.dims.of(m));
        c.features(m) = l2_normalize_rows(Matrix(n, out.dims.of(m), std::move(values)));
      }
      out.conversations.push_back(std::move(c));
    }
  } catch (const json::exception &e) {
    throw DataError(K::Malformed, "invalid manifest '" + path.string() + "': " + e.what());
  }
  out.validate();
  return out;
}

fs::path save_featureset(const FeatureSet &set, const fs::path &dir) {
  set.validate();
  std::error_code ec;
  fs::create_directories(dir / "blobs", ec);
  if (ec)
    throw IoError("cannot create '" + (dir / "blobs").string() + "': " + ec.message());
  json doc;
  doc["version"] = 1;
  doc["dims"] = {{"text", set.dims.text}, {"audio", set.dims.audio}, {"visual", set.dims.visual}};
  doc["classes"] = set.class_names;
  doc["conversations"] = json::array();
  for (const auto &c : set.conversations) {
    json blobs;
    for (Modality m : kModalities) {
      const std::string rel = "blobs/" + c.id + "." + modality_name(m) + ".f64";
      write_f64_blob(dir / rel, c.features(m).data);
      blobs[modality_name(m)] = rel;
    }
    doc["conversations"].push_back(
      {{"id", c.id}, {"n_utterances", c.size()}, {"labels", c.labels}, {"blobs", blobs}});
  }
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
  return path;
}

std::string dataset_fingerprint(const fs::path &manifest_path) {
  const fs::path path = manifest_file(manifest_path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  auto feed = [&](const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
      throw IoError("cannot open '" + p.string() + "'");
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  };
  feed(path);
  const json doc = read_json(path);
  try {
    for (const auto &entry : doc.at("conversations"))
      for (Modality m : kModalities)
        feed(path.parent_path() / entry.at("blobs").at(modality_name(m)).get<std::string>());
  } catch (const json::exception &e) {
    throw DataError(DataError::Kind::Malformed, "invalid manifest '" + path.string() + "': " +
                                                  e.what());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

FeatureSet synth_dataset(const SynthOptions &opts) {
  if (opts.classes < 2)
    throw ConfigError("synth: need at least 2 classes, got " + std::to_string(opts.classes));
  for (Modality m : kModalities)
    if (opts.dims.of(m) < 2)
      throw ConfigError(std::string("synth: ") + modality_name(m) + " dim must be >= 2");
  if (opts.conversations == 0)
    throw ConfigError("synth: need at least one conversation");
  if (opts.min_utterances == 0 || opts.min_utterances > opts.max_utterances)
    throw ConfigError("synth: utterance range must satisfy 1 <= min <= max");
  if (!(opts.cluster_spread >= 0.0))
    throw ConfigError("synth: cluster spread must be nonnegative");

  const Rng root(opts.seed);
  FeatureSet out;
  out.dims = opts.dims;
  for (std::size_t c = 0; c < opts.classes; ++c)
    out.class_names.push_back("class_" + std::to_string(c));

  std::array<Matrix, 3> centers;
  {
    Rng rng = root.split("centers");
    for (std::size_t mi = 0; mi < 3; ++mi) {
      centers[mi] = Matrix(opts.classes, opts.dims.of(kModalities[mi]));
      for (double &v : centers[mi].data)
        v = rng.normal();
    }
  }

  Rng len_rng = root.split("lengths");
  Rng label_rng = root.split("labels");
  Rng noise_rng = root.split("noise");
  std::vector<int> block;
  std::size_t block_pos = 0;
  for (std::size_t k = 0; k < opts.conversations; ++k) {
    Conversation conv;
    std::ostringstream id;
    id << "conv_" << std::setw(4) << std::setfill('0') << k;
    conv.id = id.str();
    const std::size_t n =
      opts.min_utterances + len_rng.below(opts.max_utterances - opts.min_utterances + 1);
    for (std::size_t u = 0; u < n; ++u) {
      if (block_pos == block.size()) {
        block.resize(opts.classes);
        std::iota(block.begin(), block.end(), 0);
        for (std::size_t i = block.size() - 1; i > 0; --i)
          std::swap(block[i], block[label_rng.below(i + 1)]);
        block_pos = 0;
      }
      conv.labels.push_back(block[block_pos++]);
    }
    for (std::size_t mi = 0; mi < 3; ++mi) {
      const Modality m = kModalities[mi];
      Matrix f(n, opts.dims.of(m));
      for (std::size_t u = 0; u < n; ++u) {
        const auto center = centers[mi].row(static_cast<std::size_t>(conv.labels[u]));
        for (std::size_t j = 0; j < f.cols; ++j)
          f(u, j) = center[j] + opts.cluster_spread * noise_rng.normal();
      }
      conv.features(m) = l2_normalize_rows(std::move(f));
    }
    out.conversations.push_back(std::move(conv));
  }
  return out;
}

DatasetSplit split(const FeatureSet &set, const SplitRatios &ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9)
    throw ConfigError("split ratios must be nonnegative and sum to 1");
  const std::size_t n = set.conversations.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * n + 0.5));
  const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * n + 0.5));
  if (n_train + n_valid >= n || n_train == 0 || n_valid == 0)
    throw ConfigError("split of " + std::to_string(n) + " conversations leaves an empty part");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).split("split");
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<int> part(n);
  for (std::size_t i = 0; i < n; ++i)
    part[order[i]] = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);

  DatasetSplit out;
  for (FeatureSet *p : {&out.train, &out.valid, &out.test}) {
    p->dims = set.dims;
    p->class_names = set.class_names;
  }
  for (std::size_t i = 0; i < n; ++i) {
    FeatureSet &dst = part[i] == 0 ? out.train : (part[i] == 1 ? out.valid : out.test);
    dst.conversations.push_back(set.conversations[i]);
  }
  return out;
}

} // namespace synctva
