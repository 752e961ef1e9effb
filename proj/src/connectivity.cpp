#include "cylstable/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cylstable/error.hpp"
#include "cylstable/rng.hpp"

namespace cylstable {

namespace {

// Union-find whose root is always the smallest index of its class, so the
// final labels do not depend on the order of unions.
class MinRootUnionFind {
 public:
  explicit MinRootUnionFind(std::int64_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::int64_t find(std::int64_t i) {
    std::int64_t root = i;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[i] != root) {
      const std::int64_t next = parent_[i];
      parent_[i] = root;
      i = next;
    }
    return root;
  }

  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<std::int64_t> parent_;
};

std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> s(shape.size());
  std::int64_t acc = 1;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    s[a] = acc;
    acc *= shape[a];
  }
  return s;
}

void label_lines(RookGrid& g, const RookOptions& options) {
  const std::int64_t n = g.cell_count();
  const auto strides = strides_of(g.shape);
  MinRootUnionFind uf(n);

  // A line along axis a is identified by its first cell (coordinate a == 0).
  struct Line {
    int axis;
    std::int64_t start;
  };
  std::vector<Line> lines;
  for (int a = 0; a < g.dim(); ++a) {
    for (std::int64_t c = 0; c < n; ++c) {
      if ((c / strides[a]) % g.shape[a] == 0) lines.push_back({a, c});
    }
  }
  if (options.shuffle_seed) {
    std::mt19937_64 rng(*options.shuffle_seed);
    std::shuffle(lines.begin(), lines.end(), rng);
  }
  for (const Line& line : lines) {
    std::int64_t first = -1;
    for (std::int64_t k = 0; k < g.shape[line.axis]; ++k) {
      const std::int64_t c = line.start + k * strides[line.axis];
      if (!g.occupied[c]) continue;
      if (first < 0) {
        first = c;
      } else {
        uf.unite(first, c);
      }
    }
  }

  g.labels.assign(n, -1);
  g.n_components = 0;
  for (std::int64_t c = 0; c < n; ++c) {
    if (!g.occupied[c]) continue;
    g.labels[c] = uf.find(c);
    if (g.labels[c] == c) ++g.n_components;
  }
}

std::vector<std::int64_t> coords_of(const RookGrid& g, std::int64_t index) {
  std::vector<std::int64_t> c(g.shape.size());
  for (std::size_t a = 0; a < g.shape.size(); ++a) {
    c[a] = index % g.shape[a];
    index /= g.shape[a];
  }
  return c;
}

}  // namespace

std::int64_t RookGrid::cell_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

Point RookGrid::cell_center(std::int64_t index) const {
  const auto c = coords_of(*this, index);
  Point p(shape.size());
  for (std::size_t a = 0; a < shape.size(); ++a) p[a] = origin[a] + (static_cast<double>(c[a]) + 0.5) * h;
  return p;
}

std::int64_t RookGrid::cell_of(std::span<const double> x) const {
  std::int64_t index = 0, stride = 1;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    auto k = static_cast<std::int64_t>(std::floor((x[a] - origin[a]) / h));
    k = std::clamp<std::int64_t>(k, 0, shape[a] - 1);
    index += k * stride;
    stride *= shape[a];
  }
  return index;
}

std::int64_t RookGrid::nearest_occupied(std::span<const double> x) const {
  const std::int64_t home = cell_of(x);
  if (occupied[home]) return home;
  const auto center = coords_of(*this, home);
  const auto strides = strides_of(shape);
  const std::int64_t max_radius = *std::max_element(shape.begin(), shape.end());
  std::int64_t best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> offset(shape.size());
  for (std::int64_t k = 1; k <= max_radius; ++k) {
    // Every cell at Chebyshev distance k is at least (k - 1) h away from x.
    const double floor_dist = static_cast<double>(k - 1) * h;
    if (best >= 0 && floor_dist * floor_dist > best_d2) break;
    std::fill(offset.begin(), offset.end(), -k);
    for (;;) {
      std::int64_t cheb = 0;
      bool valid = true;
      std::int64_t index = 0;
      for (std::size_t a = 0; a < shape.size(); ++a) {
        cheb = std::max(cheb, std::abs(offset[a]));
        const std::int64_t q = center[a] + offset[a];
        if (q < 0 || q >= shape[a]) valid = false;
        index += q * strides[a];
      }
      if (valid && cheb == k && occupied[index]) {
        const Point p = cell_center(index);
        double d2 = 0.0;
        for (std::size_t a = 0; a < shape.size(); ++a) d2 += (p[a] - x[a]) * (p[a] - x[a]);
        if (d2 < best_d2 || (d2 == best_d2 && index < best)) {
          best_d2 = d2;
          best = index;
        }
      }
      std::size_t a = 0;
      while (a < offset.size() && offset[a] == k) offset[a++] = -k;
      if (a == offset.size()) break;
      ++offset[a];
    }
  }
  return best;
}

RookGrid rook_components(std::vector<std::int64_t> shape, std::vector<std::uint8_t> occupied, double h,
                         Point origin, const RookOptions& options) {
  if (shape.empty() || shape.size() != origin.size()) {
    throw Error(ErrorCode::InvalidArgument, "grid shape and origin must have equal, non-zero length");
  }
  RookGrid g;
  g.h = h;
  g.origin = std::move(origin);
  g.shape = std::move(shape);
  if (static_cast<std::int64_t>(occupied.size()) != g.cell_count()) {
    throw Error(ErrorCode::InvalidArgument, "occupancy size does not match grid shape");
  }
  g.occupied = std::move(occupied);
  label_lines(g, options);
  return g;
}

RookGrid rook_components(const Domain& domain, double h, const RookOptions& options) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
  const auto& box = domain.bbox();
  std::vector<std::int64_t> shape(domain.dim());
  double cells = 1.0;
  for (int a = 0; a < domain.dim(); ++a) {
    if (!std::isfinite(box.lo[a]) || !std::isfinite(box.hi[a])) {
      throw Error(ErrorCode::InvalidArgument, "domain bounding box must be finite");
    }
    shape[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((box.hi[a] - box.lo[a]) / h)));
    cells *= static_cast<double>(shape[a]);
  }
  if (cells > static_cast<double>(options.max_cells)) {
    throw Error(ErrorCode::GridTooLarge, std::to_string(cells) + " cells exceed the budget of " +
                                             std::to_string(options.max_cells));
  }
  RookGrid g;
  g.h = h;
  g.origin = box.lo;
  g.shape = shape;
  const std::int64_t n = g.cell_count();
  g.occupied.assign(n, 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n; ++c) {
    g.occupied[c] = domain.contains(g.cell_center(c)) ? 1 : 0;
  }
  label_lines(g, options);
  return g;
}

double default_spacing(const Domain& domain) { return domain.min_feature() / 8.0; }

bool same_class(const RookGrid& grid, const Domain& domain, std::span<const double> x,
                std::span<const double> y) {
  if (!domain.contains(x) || !domain.contains(y)) {
    throw Error(ErrorCode::PointOutsideDomain, "same_class needs both points inside the domain");
  }
  if (std::equal(x.begin(), x.end(), y.begin(), y.end())) return true;
  const std::int64_t cx = grid.nearest_occupied(x);
  const std::int64_t cy = grid.nearest_occupied(y);
  if (cx < 0 || cy < 0) return false;
  return grid.labels[cx] == grid.labels[cy];
}

HgammaPairResult check_hgamma_pair(const Domain& domain, double gamma, std::span<const double> x,
                                   std::span<const double> y, double r) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 1]");
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "r must be positive");
  const int d = domain.dim();
  if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d) {
    throw Error(ErrorCode::InvalidArgument, "point dimension does not match domain");
  }
  if (d > 8) throw Error(ErrorCode::CombinatorialBudget, "refusing to enumerate d! orders for d > 8");
  const double slack = 1e-12 * std::max(1.0, r);
  if (std::min(domain.signed_distance(x), domain.signed_distance(y)) < r - slack) {
    throw Error(ErrorCode::PreconditionViolated, "need delta(x) and delta(y) >= r");
  }

  HgammaPairResult result;
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  bool first = true;
  Point z(d);
  do {
    std::copy(x.begin(), x.end(), z.begin());
    int failed = -1;
    for (int k = 0; k < d; ++k) {
      z[order[k]] = y[order[k]];
      if (!domain.ball_inside(z, gamma * r)) {
        failed = k;
        break;
      }
    }
    if (failed < 0) {
      result.holds = true;
      result.permutation = order;
      return result;
    }
    if (first) {
      result.failing_step = failed;
      result.failing_center = z;
      first = false;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return result;
}

nlohmann::json ConnectivityReport::to_json() const {
  nlohmann::json j = {{"h", h},
                      {"n_components", n_components},
                      {"condition_1_13", condition_1_13},
                      {"hgamma_gamma", hgamma_gamma},
                      {"hgamma_holds", hgamma_holds},
                      {"pairs_tested", pairs_tested}};
  if (counterexample) {
    j["counterexample"] = {{"x", counterexample->x},
                           {"y", counterexample->y},
                           {"r", counterexample->r},
                           {"failing_step", counterexample->failing_step},
                           {"failing_center", counterexample->failing_center}};
  } else {
    j["counterexample"] = nullptr;
  }
  return j;
}

ConnectivityReport check_irreducible(const Domain& domain, double h) {
  const RookGrid g = rook_components(domain, h);
  ConnectivityReport report;
  report.h = h;
  report.n_components = g.n_components;
  report.condition_1_13 = g.n_components == 1;
  return report;
}

ConnectivityReport check_hgamma_domain(const Domain& domain, double gamma, std::int64_t n_pairs,
                                       std::uint64_t seed) {
  if (n_pairs < 1) throw Error(ErrorCode::InvalidArgument, "n_pairs must be at least 1");
  ConnectivityReport report = check_irreducible(domain, default_spacing(domain));
  report.hgamma_gamma = gamma;
  report.hgamma_holds = true;

  const auto& box = domain.bbox();
  const int d = domain.dim();
  RandomStream stream(seed, 0, 0, StreamPurpose::DomainSampling);
  constexpr std::int64_t kMaxMisses = 1'000'000;
  std::int64_t misses = 0;
  auto draw_inside = [&](Point& p) {
    for (;;) {
      for (int a = 0; a < d; ++a) p[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * stream.next_uniform();
      if (domain.contains(p)) return;
      if (++misses > kMaxMisses) {
        throw Error(ErrorCode::SamplingExhausted, "rejection sampling found no interior points");
      }
    }
  };
  Point x(d), y(d);
  for (std::int64_t i = 0; i < n_pairs; ++i) {
    draw_inside(x);
    draw_inside(y);
    misses = 0;
    const double r = std::min(domain.signed_distance(x), domain.signed_distance(y));
    const auto pair = check_hgamma_pair(domain, gamma, x, y, r);
    ++report.pairs_tested;
    if (!pair.holds) {
      report.hgamma_holds = false;
      report.counterexample = HgammaCounterexample{x, y, r, pair.failing_step, pair.failing_center};
      break;
    }
  }
  return report;
}

}  // namespace cylstable
