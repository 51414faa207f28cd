// Bundle container:
//   magic "CAPGEST\0" | u32 version | u64 payload length | payload | u32 CRC-32(payload)
// All integers little-endian; doubles as their IEEE-754 bit patterns.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "capgest/error.hpp"
#include "capgest/pipeline.hpp"

namespace capgest {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'P', 'G', 'E', 'S', 'T', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;

class Writer {
public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void boolean(bool v) { u8(v ? 1 : 0); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void vec(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i64(x);
  }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool boolean() { return u8() != 0; }
  std::size_t count(std::size_t element_size) {
    const auto n = u64();
    if (element_size > 0 && n > (size_ - pos_) / element_size) corrupt("length field exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const auto n = count(1);
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  Eigen::RowVectorXd vec() {
    const auto n = count(8);
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = f64();
    return v;
  }
  Eigen::MatrixXd mat() {
    const auto rows = u64();
    const auto cols = count(0);
    if (cols > 0 && rows > (size_ - pos_) / 8 / cols) corrupt("matrix size exceeds payload");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    return m;
  }
  std::vector<int> ints() {
    const auto n = count(8);
    std::vector<int> v(n);
    for (auto& x : v) x = static_cast<int>(i64());
    return v;
  }
  bool done() const { return pos_ == size_; }

  [[noreturn]] static void corrupt(const std::string& why) { throw Error(ErrorKind::CorruptFile, why); }

private:
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) corrupt("unexpected end of payload");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void put(Writer& w, const PcaModel& m) {
  w.mat(m.components);
  w.vec(m.singular_values.transpose());
  w.vec(m.explained_variance_ratio.transpose());
  w.vec(m.mean);
  w.boolean(m.centered);
}

PcaModel get_pca(Reader& r) {
  PcaModel m;
  m.components = r.mat();
  m.singular_values = r.vec().transpose();
  m.explained_variance_ratio = r.vec().transpose();
  m.mean = r.vec();
  m.centered = r.boolean();
  return m;
}

void put(Writer& w, const WhitenModel& m) {
  w.vec(m.mean);
  w.vec(m.scale);
  w.mat(m.projection);
  w.vec(m.singular_values.transpose());
}

WhitenModel get_whiten(Reader& r) {
  WhitenModel m;
  m.mean = r.vec();
  m.scale = r.vec();
  m.projection = r.mat();
  m.singular_values = r.vec().transpose();
  return m;
}

void put(Writer& w, const FittedKernel& k) {
  w.str(k.spec_.encode());
  w.u64(k.parts.size());
  if (k.spec_.kind == KernelKind::Concat) {
    for (const auto& p : k.parts) put(w, p);
    return;
  }
  put(w, k.base);
  w.boolean(k.outer.has_value());
  if (k.outer) put(w, *k.outer);
  w.mat(k.reference);
}

FittedKernel get_kernel(Reader& r, int depth = 0) {
  if (depth > 16) Reader::corrupt("kernel nesting too deep");
  FittedKernel k;
  try {
    k.spec_ = KernelSpec::parse(r.str());
  } catch (const Error& e) {
    Reader::corrupt(std::string("bad kernel spec: ") + e.what());
  }
  const auto parts = r.u64();
  if (k.spec_.kind == KernelKind::Concat) {
    if (parts != 2) Reader::corrupt("concat kernel must have two parts");
    for (int i = 0; i < 2; ++i) k.parts.push_back(get_kernel(r, depth + 1));
    return k;
  }
  k.base = get_whiten(r);
  if (r.boolean()) k.outer = get_whiten(r);
  k.reference = r.mat();
  return k;
}

void put(Writer& w, const LdaModel& m) {
  w.vec(m.weights);
  w.f64(m.bias);
  w.vec(m.mean0);
  w.vec(m.mean1);
  w.f64(m.ridge);
}

LdaModel get_lda(Reader& r) {
  LdaModel m;
  m.weights = r.vec();
  m.bias = r.f64();
  m.mean0 = r.vec();
  m.mean1 = r.vec();
  m.ridge = r.f64();
  return m;
}

void put(Writer& w, const CentroidModel& m) {
  w.ints(m.classes);
  w.mat(m.centroids);
}

CentroidModel get_centroid(Reader& r) {
  CentroidModel m;
  m.classes = r.ints();
  m.centroids = r.mat();
  return m;
}

void put(Writer& w, const CorrectorStats& s) {
  for (auto v : {s.train_candidates, s.train_errors, s.train_tp, s.holdout_candidates, s.holdout_errors, s.holdout_tp})
    w.u64(v);
}

CorrectorStats get_stats(Reader& r) {
  CorrectorStats s;
  for (auto* v : {&s.train_candidates, &s.train_errors, &s.train_tp, &s.holdout_candidates, &s.holdout_errors,
                  &s.holdout_tp})
    *v = r.u64();
  return s;
}

ErrorGroup get_group(Reader& r) {
  try {
    return ErrorGroup::from_id(static_cast<int>(r.i64()));
  } catch (const Error& e) {
    Reader::corrupt(e.what());
  }
}

void put_payload(Writer& w, const ModelBundle& b) {
  const auto& c = b.cascade;
  // base
  put(w, c.base.pca);
  w.mat(c.base.knn.reference);
  w.ints(c.base.knn.labels);
  w.u64(c.base.knn.k);
  // group classifier
  w.u8(static_cast<std::uint8_t>(c.groups.kind));
  w.str(c.groups.spec.encode());
  w.u64(c.groups.groups.size());
  for (const auto& g : c.groups.groups) w.i64(g.id());
  w.boolean(c.groups.fallback);
  w.boolean(c.groups.kernel.has_value());
  if (c.groups.kernel) put(w, *c.groups.kernel);
  put(w, c.groups.centroid);
  w.u64(c.groups.one_vs_rest.size());
  for (const auto& m : c.groups.one_vs_rest) put(w, m);
  // correctors
  w.u64(c.correctors.size());
  for (const auto& k : c.correctors) {
    w.i64(k.group.id());
    w.boolean(k.enabled);
    put(w, k.stats);
    if (!k.enabled) continue;
    put(w, k.kernel);
    w.u8(static_cast<std::uint8_t>(k.classifier.kind));
    if (k.classifier.kind == BinaryClassifierKind::Lda) put(w, k.classifier.lda);
    else put(w, k.classifier.centroid);
    w.f64(k.threshold);
  }
  // metadata
  w.u64(b.stride_frames);
  const auto& entries = b.calibration.entries();
  w.u64(entries.size());
  for (const auto& [user, ranges] : entries) {
    w.str(user);
    for (const auto& r : ranges) {
      w.boolean(r.has_value());
      w.f64(r ? r->min_raw : 0.0);
      w.f64(r ? r->max_raw : 0.0);
    }
  }
}

ModelBundle get_payload(Reader& r) {
  ModelBundle b;
  auto& c = b.cascade;
  c.base.pca = get_pca(r);
  c.base.knn.reference = r.mat();
  c.base.knn.labels = r.ints();
  c.base.knn.k = r.u64();
  if (c.base.knn.labels.size() != static_cast<std::size_t>(c.base.knn.reference.rows()))
    Reader::corrupt("KNN label count mismatch");

  const auto kind = r.u8();
  if (kind > 1) Reader::corrupt("bad group classifier kind");
  c.groups.kind = static_cast<GroupClassifierKind>(kind);
  try {
    c.groups.spec = KernelSpec::parse(r.str());
  } catch (const Error& e) {
    Reader::corrupt(e.what());
  }
  const auto n_groups = r.count(8);
  for (std::size_t i = 0; i < n_groups; ++i) c.groups.groups.push_back(get_group(r));
  c.groups.fallback = r.boolean();
  if (r.boolean()) c.groups.kernel = get_kernel(r);
  c.groups.centroid = get_centroid(r);
  const auto n_ovr = r.count(1);
  for (std::size_t i = 0; i < n_ovr; ++i) c.groups.one_vs_rest.push_back(get_lda(r));

  const auto n_correctors = r.count(1);
  for (std::size_t i = 0; i < n_correctors; ++i) {
    Corrector k;
    k.group = get_group(r);
    k.enabled = r.boolean();
    k.stats = get_stats(r);
    if (k.enabled) {
      k.kernel = get_kernel(r);
      const auto ck = r.u8();
      if (ck > 1) Reader::corrupt("bad classifier kind");
      k.classifier.kind = static_cast<BinaryClassifierKind>(ck);
      if (k.classifier.kind == BinaryClassifierKind::Lda) k.classifier.lda = get_lda(r);
      else k.classifier.centroid = get_centroid(r);
      k.threshold = r.f64();
    }
    c.correctors.push_back(std::move(k));
  }

  b.stride_frames = r.u64();
  const auto n_users = r.count(1);
  for (std::size_t i = 0; i < n_users; ++i) {
    const auto user = r.str();
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      const bool present = r.boolean();
      const double lo = r.f64(), hi = r.f64();
      if (present) b.calibration.set(user, ch, {lo, hi});
    }
  }
  if (!r.done()) Reader::corrupt("trailing bytes after payload");
  return b;
}

std::uint32_t crc(const std::uint8_t* data, std::size_t size) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(c, data, static_cast<uInt>(size)));
}

}  // namespace

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle) {
  Writer payload;
  put_payload(payload, bundle);
  const auto& p = payload.bytes();

  Writer out;
  out.bytes().insert(out.bytes().end(), std::begin(kMagic), std::end(kMagic));
  out.u32(bundle.version);
  out.u64(p.size());
  out.bytes().insert(out.bytes().end(), p.begin(), p.end());
  out.u32(crc(p.data(), p.size()));
  return std::move(out.bytes());
}

ModelBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize + 4 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorKind::CorruptFile, "not a bundle file (bad magic or too short)");
  Reader header(bytes.data() + 8, 12);
  const auto version = header.u32();
  if (version != kBundleVersion)
    throw Error(ErrorKind::VersionMismatch, "bundle version " + std::to_string(version) + ", this build reads " +
                                                std::to_string(kBundleVersion));
  const auto length = header.u64();
  if (length != bytes.size() - kHeaderSize - 4) throw Error(ErrorKind::CorruptFile, "payload length mismatch (truncated?)");
  const auto* payload = bytes.data() + kHeaderSize;
  Reader trailer(payload + length, 4);
  if (trailer.u32() != crc(payload, static_cast<std::size_t>(length)))
    throw Error(ErrorKind::CorruptFile, "checksum mismatch");

  Reader r(payload, static_cast<std::size_t>(length));
  ModelBundle b = get_payload(r);
  b.version = version;
  return b;
}

std::size_t save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(bundle);
  if (bytes.size() >= kBundleSizeBudget)
    throw Error(ErrorKind::OversizeBundle, "bundle is " + std::to_string(bytes.size()) + " bytes, budget is " +
                                               std::to_string(kBundleSizeBudget));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
  return bytes.size();
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace capgest
