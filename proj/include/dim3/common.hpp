#pragma once
// Shared primitives: id types, hashing, error taxonomy, memory budget,
// chunked parallel execution.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dim3 {

// Dense ids assigned by the mapping layer. 32 bits: code spaces above 2^32
// distinct values are out of scope for this engine.
using Code = std::uint32_t;

inline constexpr std::uint32_t kBlockBits = 256;  // logical wide-check width W

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes: usage 2, io/format 3, resource 4.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing. Multiplicative xor-fold finalizer; also the mixing half of the
// counter generator in datagen.

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// FNV-1a over raw bytes, then mixed. Used for string dictionary keys and
// table fingerprints.
inline std::uint64_t hash_bytes(const void* data, std::size_t n,
                                std::uint64_t seed = 0) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return mix64(h);
}

// ---------------------------------------------------------------------------
// Memory budget. Large structures charge before allocating; exceeding the
// limit raises ResourceError instead of letting the process get OOM killed.

class MemoryBudget {
 public:
  explicit MemoryBudget(std::uint64_t limit_bytes) : limit_(limit_bytes) {}

  void charge(std::uint64_t bytes) {
    std::uint64_t now = used_.fetch_add(bytes) + bytes;
    if (now > limit_) {
      used_.fetch_sub(bytes);
      throw ResourceError("memory budget exceeded: need " +
                          std::to_string(now) + " bytes, limit " +
                          std::to_string(limit_) + " bytes");
    }
    std::uint64_t prev = peak_.load();
    while (prev < now && !peak_.compare_exchange_weak(prev, now)) {
    }
  }
  void release(std::uint64_t bytes) { used_.fetch_sub(bytes); }
  std::uint64_t used() const { return used_.load(); }
  std::uint64_t peak() const { return peak_.load(); }
  std::uint64_t limit() const { return limit_; }

 private:
  std::uint64_t limit_;
  std::atomic<std::uint64_t> used_{0};
  std::atomic<std::uint64_t> peak_{0};
};

// RAII charge for scoped structures.
class BudgetCharge {
 public:
  BudgetCharge() = default;
  BudgetCharge(MemoryBudget* b, std::uint64_t bytes) : budget_(b), bytes_(bytes) {
    if (budget_ != nullptr) budget_->charge(bytes_);
  }
  ~BudgetCharge() {
    if (budget_ != nullptr) budget_->release(bytes_);
  }
  BudgetCharge(const BudgetCharge&) = delete;
  BudgetCharge& operator=(const BudgetCharge&) = delete;
  BudgetCharge(BudgetCharge&& o) noexcept : budget_(o.budget_), bytes_(o.bytes_) {
    o.budget_ = nullptr;
  }
  BudgetCharge& operator=(BudgetCharge&& o) noexcept {
    if (this != &o) {
      if (budget_ != nullptr) budget_->release(bytes_);
      budget_ = o.budget_;
      bytes_ = o.bytes_;
      o.budget_ = nullptr;
    }
    return *this;
  }

 private:
  MemoryBudget* budget_ = nullptr;
  std::uint64_t bytes_ = 0;
};

// ---------------------------------------------------------------------------
// Chunked parallel loop over [begin, end). fn(chunk_index, lo, hi) runs on
// contiguous ranges; chunk order is by index so callers can merge worker
// output deterministically. threads <= 1 runs inline.

template <class Fn>
void run_chunked(std::uint64_t begin, std::uint64_t end, int threads, Fn&& fn) {
  std::uint64_t n = end > begin ? end - begin : 0;
  if (threads <= 1 || n <= 1) {
    if (n > 0) fn(0, begin, end);
    return;
  }
  std::uint64_t nchunks = std::min<std::uint64_t>(static_cast<std::uint64_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(nchunks);
  pool.reserve(nchunks);
  for (std::uint64_t c = 0; c < nchunks; ++c) {
    std::uint64_t lo = begin + n * c / nchunks;
    std::uint64_t hi = begin + n * (c + 1) / nchunks;
    pool.emplace_back([&, c, lo, hi] {
      try {
        fn(c, lo, hi);
      } catch (...) {
        errs[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace dim3
