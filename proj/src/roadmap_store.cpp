#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "nodnav/planner.hpp"
#include "nodnav/strategy_game.hpp"

namespace nodnav::planner {

namespace {

constexpr char kMagic[8] = {'N', 'O', 'D', 'R', 'M', 'A', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  template <class T>
  void put_vec(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const char*>(v.data());
    buf_.insert(buf_.end(), p, p + v.size() * sizeof(T));
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <class T>
  std::vector<T> get_vec() {
    const auto count = get<std::uint64_t>();
    if (count > (buf_.size() - pos_) / sizeof(T)) throw std::runtime_error("roadmap file truncated");
    std::vector<T> v(count);
    std::memcpy(v.data(), buf_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return v;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw std::runtime_error("roadmap file truncated");
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void save_roadmap(const Roadmap& rm, const std::filesystem::path& path) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(rm.env_hash);
  w.put<std::int32_t>(rm.n);
  w.put_vec(rm.order);
  w.put(rm.seed);
  w.put<std::uint64_t>(rm.budget);
  w.put_vec(rm.coords);
  w.put_vec(rm.label);
  w.put_vec(rm.penalty);
  w.put_vec(rm.offsets);
  w.put_vec(rm.targets);
  w.put_vec(rm.lengths);
  w.put_vec(rm.edge_label);
  const std::uint64_t checksum = fnv1a(w.bytes().data(), w.bytes().size());

  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Roadmap load_roadmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw std::runtime_error("roadmap file truncated");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof stored, sizeof stored);
  bytes.resize(bytes.size() - sizeof stored);
  if (fnv1a(bytes.data(), bytes.size()) != stored)
    throw std::runtime_error("roadmap checksum mismatch");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a roadmap file");

  Reader r(std::move(bytes));
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>();
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported roadmap version");
  Roadmap rm;
  rm.env_hash = r.get<std::uint64_t>();
  rm.n = r.get<std::int32_t>();
  rm.order = r.get_vec<int>();
  rm.seed = r.get<std::uint64_t>();
  rm.budget = r.get<std::uint64_t>();
  rm.coords = r.get_vec<double>();
  rm.label = r.get_vec<std::int8_t>();
  rm.penalty = r.get_vec<double>();
  rm.offsets = r.get_vec<std::uint32_t>();
  rm.targets = r.get_vec<std::uint32_t>();
  rm.lengths = r.get_vec<double>();
  rm.edge_label = r.get_vec<std::int8_t>();
  if (!r.done()) throw std::runtime_error("trailing bytes in roadmap file");

  const std::size_t count = rm.label.size();
  if (rm.n < 1 || rm.order.size() != static_cast<std::size_t>(rm.n) ||
      rm.coords.size() != count * static_cast<std::size_t>(2 * rm.n) ||
      rm.penalty.size() != count || rm.offsets.size() != count + 1 ||
      rm.offsets.back() != rm.targets.size() || rm.lengths.size() != rm.targets.size() ||
      rm.edge_label.size() != rm.targets.size())
    throw std::runtime_error("inconsistent roadmap file");
  for (std::uint32_t t : rm.targets)
    if (t >= count) throw std::runtime_error("inconsistent roadmap file");
  return rm;
}

RoadmapStore::RoadmapStore(Environment env, PlannerParams params,
                           std::optional<std::filesystem::path> cache_dir, bool allow_build)
    : env_(std::move(env)), params_(std::move(params)), cache_dir_(std::move(cache_dir)),
      allow_build_(allow_build) {}

std::uint64_t RoadmapStore::seed_for(int n_robots, std::span<const int> order) const {
  // splitmix64 over (seed, n, order rank) so every roadmap has its own stream.
  std::uint64_t z = params_.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(n_robots) +
                    0xBF58476D1CE4E5B9ULL * (game::strategy_index(order) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::filesystem::path RoadmapStore::cache_file(int n_robots, std::span<const int> order) const {
  std::ostringstream name;
  name << "roadmap_n" << n_robots << "_s" << game::strategy_index(order) + 1 << "_seed"
       << params_.seed << "_b" << params_.budget_for(n_robots) << "_env" << std::hex
       << env_.hash() << ".bin";
  return (cache_dir_ ? *cache_dir_ : std::filesystem::path{}) / name.str();
}

RoadmapStore::Entry& RoadmapStore::entry(int n_robots, std::span<const int> order) {
  std::vector<int> key{n_robots};
  key.insert(key.end(), order.begin(), order.end());
  std::lock_guard lock(mutex_);
  auto& slot = entries_[key];
  if (!slot) slot = std::make_unique<Entry>();
  return *slot;
}

void RoadmapStore::fill(Entry& e, int n_robots, std::span<const int> order) {
  const std::size_t budget = params_.budget_for(n_robots);
  const std::uint64_t seed = seed_for(n_robots, order);
  if (cache_dir_) {
    const auto file = cache_file(n_robots, order);
    if (std::filesystem::exists(file)) {
      try {
        Roadmap rm = load_roadmap(file);
        if (rm.env_hash == env_.hash() && rm.n == n_robots && rm.seed == seed &&
            rm.budget == budget && std::equal(order.begin(), order.end(), rm.order.begin(), rm.order.end())) {
          e.roadmap = std::make_unique<Roadmap>(std::move(rm));
          return;
        }
        std::cerr << "warning: stale roadmap cache " << file.string() << ", rebuilding\n";
      } catch (const std::exception& ex) {
        std::cerr << "warning: corrupted roadmap cache " << file.string() << " (" << ex.what()
                  << "), rebuilding\n";
      }
    } else if (!allow_build_) {
      throw PlanningFailure("roadmap cache missing: " + file.string());
    }
  } else if (!allow_build_) {
    throw PlanningFailure("no roadmap cache directory and building is disabled");
  }
  e.roadmap = std::make_unique<Roadmap>(build_roadmap(env_, order, n_robots, budget, seed, params_));
  e.built_fresh = true;
  if (cache_dir_) save_roadmap(*e.roadmap, cache_file(n_robots, order));
}

const Roadmap& RoadmapStore::get(int n_robots, std::span<const int> order) {
  Entry& e = entry(n_robots, order);
  std::call_once(e.once, [&] { fill(e, n_robots, order); });
  return *e.roadmap;
}

int RoadmapStore::prepare(int n_robots) {
  int built = 0;
  for (const auto& s : game::enumerate_strategies(n_robots)) {
    Entry& e = entry(n_robots, s.order);
    std::call_once(e.once, [&] { fill(e, n_robots, s.order); });
    if (e.built_fresh) ++built;
  }
  return built;
}

}  // namespace nodnav::planner
