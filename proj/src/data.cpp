#include "heroes/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

namespace {

constexpr char kMagic[4] = {'H', 'R', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DomainError("dataset file truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Dataset::validate() const {
  if (classes == 0) throw DomainError("dataset has no classes");
  if (features.rank() != 2 || features.rows() != labels.size()) throw ShapeError("features/labels mismatch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DomainError("label outside [0, classes)");
  std::vector<char> seen(labels.size(), 0);
  for (auto* split : {&train, &test})
    for (auto i : *split) {
      if (i >= labels.size()) throw DomainError("split index out of range");
      if (seen[i]++) throw DomainError("train/test splits overlap");
    }
}

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed) {
  if (classes == 0 || per_class == 0 || dim == 0) throw DomainError("make_blobs: counts must be positive");
  if (spread < 0.0) throw DomainError("make_blobs: negative spread");
  Rng rng(derive_seed(seed, Stream::kData));
  Tensor centers = Tensor::matrix(classes, dim);
  for (double& c : centers.storage()) c = rng.normal();

  Dataset ds;
  ds.classes = classes;
  ds.features = Tensor::matrix(classes * per_class, dim);
  ds.labels.resize(classes * per_class);
  const std::size_t n_test = (per_class + 5) / 10;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t r = c * per_class + i;
      ds.labels[r] = static_cast<int>(c);
      for (std::size_t j = 0; j < dim; ++j) ds.features(r, j) = centers(c, j) + spread * rng.normal();
    }
    std::vector<std::uint32_t> idx(per_class);
    std::iota(idx.begin(), idx.end(), static_cast<std::uint32_t>(c * per_class));
    for (std::size_t i = per_class; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    ds.test.insert(ds.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    ds.train.insert(ds.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
  return ds;
}

std::vector<std::size_t> class_quota(std::size_t classes, std::size_t dominant, double gamma,
                                     std::size_t shard_size) {
  if (classes == 0 || dominant >= classes) throw DomainError("class_quota: bad class index");
  const double lo = 100.0 / static_cast<double>(classes);
  if (gamma < lo - 1e-9 || gamma > 100.0 + 1e-9) throw DomainError("gamma must lie in [100 / C, 100]");
  if (classes == 1) return {shard_size};

  const double s = static_cast<double>(shard_size);
  const double dom_share = s * gamma / 100.0;
  const double other_share = (s - dom_share) / static_cast<double>(classes - 1);
  std::vector<std::size_t> count(classes);
  std::vector<double> rem(classes);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double share = c == dominant ? dom_share : other_share;
    const double fl = std::floor(share + 1e-9);
    count[c] = static_cast<std::size_t>(fl);
    rem[c] = std::round(std::max(0.0, share - fl) * 1e9);
    assigned += count[c];
  }
  // Tie order: d, d+1, d-1, d+2, d-2, ...
  std::vector<std::size_t> order;
  order.push_back(dominant);
  for (std::size_t k = 1; order.size() < classes; ++k) {
    order.push_back((dominant + k) % classes);
    if (order.size() < classes) order.push_back((dominant + classes - k % classes) % classes);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < shard_size; i = (i + 1) % classes, ++assigned) ++count[order[i]];
  return count;
}

Partition partition_noniid(const Dataset& ds, const PartitionSpec& spec) {
  ds.validate();
  if (spec.clients == 0) throw DomainError("partition: no clients");
  const std::size_t C = ds.classes;

  std::vector<std::vector<std::uint32_t>> pool(C);
  for (auto i : ds.train) pool[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  Rng rng(derive_seed(spec.seed, Stream::kPartition));
  for (auto& p : pool)
    for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);

  auto demand_fits = [&](std::size_t size) {
    std::vector<std::size_t> need(C, 0);
    for (std::size_t n = 0; n < spec.clients; ++n) {
      const auto q = class_quota(C, n % C, spec.gamma, size);
      for (std::size_t c = 0; c < C; ++c) need[c] += q[c];
    }
    for (std::size_t c = 0; c < C; ++c)
      if (need[c] > pool[c].size()) return false;
    return true;
  };

  std::size_t size = spec.shard_size;
  if (size == 0) {
    size = ds.train.size() / spec.clients;
    while (size > 0 && !demand_fits(size)) --size;
    if (size == 0) throw DomainError("partition: not enough training samples for one per client");
  } else if (!demand_fits(size)) {
    throw DomainError("partition: not enough samples per class for shard size " + std::to_string(size));
  }

  Partition out;
  out.shard_size = size;
  std::vector<std::size_t> next(C, 0);
  for (std::size_t n = 0; n < spec.clients; ++n) {
    const auto q = class_quota(C, n % C, spec.gamma, size);
    std::vector<std::uint32_t> shard;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t k = 0; k < q[c]; ++k) shard.push_back(pool[c][next[c]++]);
    std::sort(shard.begin(), shard.end());
    out.shards.push_back(std::move(shard));
  }
  out.discarded = ds.train.size() - spec.clients * size;
  return out;
}

Shard make_shard(const Dataset& ds, std::span<const std::uint32_t> rows) {
  Shard s;
  if (rows.empty()) throw DomainError("make_shard: no rows");
  const std::size_t d = ds.features.cols();
  s.features = Tensor::matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) s.features(i, j) = ds.features(rows[i], j);
    s.labels.push_back(ds.labels[rows[i]]);
  }
  return s;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  ds.validate();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.labels.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.features.cols()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.train.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.test.size()));
  for (double x : ds.features.values()) put<double>(out, x);
  for (int y : ds.labels) put<std::int32_t>(out, y);
  for (auto i : ds.train) put<std::uint32_t>(out, i);
  for (auto i : ds.test) put<std::uint32_t>(out, i);
  return out;
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DomainError("not a dataset file");
  Reader r(bytes.subspan(4));
  if (r.get<std::uint32_t>() != kVersion) throw DomainError("unsupported dataset version");
  const auto n = r.get<std::uint32_t>(), dim = r.get<std::uint32_t>(), classes = r.get<std::uint32_t>();
  const auto n_train = r.get<std::uint32_t>(), n_test = r.get<std::uint32_t>();
  if (n == 0 || dim == 0) throw DomainError("empty dataset");
  Dataset ds;
  ds.classes = classes;
  ds.features = Tensor::matrix(n, dim);
  for (double& x : ds.features.storage()) x = r.get<double>();
  ds.labels.resize(n);
  for (int& y : ds.labels) y = r.get<std::int32_t>();
  ds.train.resize(n_train);
  for (auto& i : ds.train) i = r.get<std::uint32_t>();
  ds.test.resize(n_test);
  for (auto& i : ds.test) i = r.get<std::uint32_t>();
  if (!r.done()) throw DomainError("trailing bytes in dataset file");
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  const auto bytes = serialize_dataset(ds);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DomainError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DomainError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DomainError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_dataset(bytes);
}

}  // namespace heroes
