#include "cylstable/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "cylstable/error.hpp"
#include "cylstable/rng.hpp"

namespace cylstable {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, msg);
}

void require_dim(std::span<const double> x, int dim) {
  require(static_cast<int>(x.size()) == dim, "point dimension does not match domain dimension");
}

Point scaled_point(const Point& p, double f) {
  Point out(p);
  for (double& c : out) c *= f;
  return out;
}

// ---- ball ------------------------------------------------------------------

class Ball final : public Shape {
 public:
  Ball(Point center, double radius) : center_(std::move(center)), radius_(radius) {
    require(!center_.empty(), "ball center must be non-empty");
    require(radius_ > 0.0 && std::isfinite(radius_), "ball radius must be positive");
  }

  PrimitiveKind kind() const override { return PrimitiveKind::Ball; }
  int dim() const override { return static_cast<int>(center_.size()); }
  bool exact() const override { return true; }
  double min_feature() const override { return radius_; }
  double c11_radius() const override { return radius_; }

  double sdf(std::span<const double> x) const override {
    require_dim(x, dim());
    double s = 0.0;
    for (std::size_t i = 0; i < center_.size(); ++i) {
      const double d = x[i] - center_[i];
      s += d * d;
    }
    return radius_ - std::sqrt(s);
  }

  BoundingBox bbox() const override {
    BoundingBox b{center_, center_};
    for (std::size_t i = 0; i < center_.size(); ++i) {
      b.lo[i] -= radius_;
      b.hi[i] += radius_;
    }
    return b;
  }

  json to_json() const override {
    return {{"kind", "ball"}, {"params", {{"center", center_}, {"radius", radius_}}}};
  }

  ShapePtr scaled(double f) const override {
    return std::make_shared<Ball>(scaled_point(center_, f), radius_ * f);
  }

  const Point& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  Point center_;
  double radius_;
};

// ---- rounded box -------------------------------------------------------------

// Minkowski sum of the box with half-widths b - rho and the ball of radius rho.
double rounded_box_sdf(std::span<const double> local, const Point& half, double rho) {
  double outside = 0.0;
  double inner_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < half.size(); ++i) {
    const double q = std::abs(local[i]) - (half[i] - rho);
    if (q > 0.0) outside += q * q;
    inner_max = std::max(inner_max, q);
  }
  const double dist = std::sqrt(outside) + std::min(inner_max, 0.0) - rho;
  return -dist;
}

void validate_rounded_box(const Point& center, const Point& half, double rho) {
  require(!center.empty() && center.size() == half.size(),
          "rounded box center and half_widths must have equal, non-zero length");
  const double min_half = *std::min_element(half.begin(), half.end());
  require(min_half > 0.0, "rounded box half-widths must be positive");
  require(rho > 0.0 && rho < min_half, "corner radius must lie in (0, min half-width)");
}

class RoundedBox final : public Shape {
 public:
  RoundedBox(Point center, Point half, double rho)
      : center_(std::move(center)), half_(std::move(half)), rho_(rho) {
    validate_rounded_box(center_, half_, rho_);
  }

  PrimitiveKind kind() const override { return PrimitiveKind::RoundedBox; }
  int dim() const override { return static_cast<int>(center_.size()); }
  bool exact() const override { return true; }
  double min_feature() const override { return *std::min_element(half_.begin(), half_.end()); }
  double c11_radius() const override { return rho_; }

  double sdf(std::span<const double> x) const override {
    require_dim(x, dim());
    double local[16];
    std::vector<double> heap;
    double* p = local;
    if (center_.size() > 16) {
      heap.resize(center_.size());
      p = heap.data();
    }
    for (std::size_t i = 0; i < center_.size(); ++i) p[i] = x[i] - center_[i];
    return rounded_box_sdf({p, center_.size()}, half_, rho_);
  }

  BoundingBox bbox() const override {
    BoundingBox b{center_, center_};
    for (std::size_t i = 0; i < center_.size(); ++i) {
      b.lo[i] -= half_[i];
      b.hi[i] += half_[i];
    }
    return b;
  }

  json to_json() const override {
    return {{"kind", "rounded_box"},
            {"params", {{"center", center_}, {"half_widths", half_}, {"corner_radius", rho_}}}};
  }

  ShapePtr scaled(double f) const override {
    return std::make_shared<RoundedBox>(scaled_point(center_, f), scaled_point(half_, f), rho_ * f);
  }

 private:
  Point center_;
  Point half_;
  double rho_;
};

class RotatedRoundedBox final : public Shape {
 public:
  RotatedRoundedBox(Point center, Point half, double rho, double angle_deg)
      : center_(std::move(center)), half_(std::move(half)), rho_(rho), angle_deg_(angle_deg) {
    require(center_.size() == 2, "rotated rounded box is planar");
    validate_rounded_box(center_, half_, rho_);
    const double a = angle_deg_ * std::numbers::pi / 180.0;
    cos_ = std::cos(a);
    sin_ = std::sin(a);
  }

  PrimitiveKind kind() const override { return PrimitiveKind::RotatedRoundedBox; }
  int dim() const override { return 2; }
  bool exact() const override { return true; }
  double min_feature() const override { return std::min(half_[0], half_[1]); }
  double c11_radius() const override { return rho_; }

  double sdf(std::span<const double> x) const override {
    require_dim(x, 2);
    const double dx = x[0] - center_[0];
    const double dy = x[1] - center_[1];
    // Rotate by -angle into the box frame.
    const double local[2] = {cos_ * dx + sin_ * dy, -sin_ * dx + cos_ * dy};
    return rounded_box_sdf(local, half_, rho_);
  }

  BoundingBox bbox() const override {
    // Support function of the rounded box along each axis.
    const double core_x = std::abs(cos_) * (half_[0] - rho_) + std::abs(sin_) * (half_[1] - rho_);
    const double core_y = std::abs(sin_) * (half_[0] - rho_) + std::abs(cos_) * (half_[1] - rho_);
    return {{center_[0] - core_x - rho_, center_[1] - core_y - rho_},
            {center_[0] + core_x + rho_, center_[1] + core_y + rho_}};
  }

  json to_json() const override {
    return {{"kind", "rotated_rounded_box"},
            {"params",
             {{"center", center_},
              {"half_widths", half_},
              {"corner_radius", rho_},
              {"angle_deg", angle_deg_}}}};
  }

  ShapePtr scaled(double f) const override {
    return std::make_shared<RotatedRoundedBox>(scaled_point(center_, f), scaled_point(half_, f),
                                               rho_ * f, angle_deg_);
  }

 private:
  Point center_;
  Point half_;
  double rho_;
  double angle_deg_;
  double cos_ = 1.0;
  double sin_ = 0.0;
};

// ---- rounded polygon ---------------------------------------------------------

struct Vec2 {
  double x, y;
};
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double length(Vec2 a) { return std::hypot(a.x, a.y); }

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return length(p - (a + s * ab));
}

bool in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  const double d1 = cross(b - a, p - a);
  const double d2 = cross(c - b, p - b);
  const double d3 = cross(a - c, p - c);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

class RoundedPolygon final : public Shape {
 public:
  RoundedPolygon(std::vector<Point> vertices, double rho) : input_(std::move(vertices)), rho_(rho) {
    require(input_.size() >= 3, "rounded polygon needs at least three vertices");
    require(rho_ > 0.0, "corner radius must be positive");
    for (const auto& v : input_) {
      require(v.size() == 2, "rounded polygon vertices must be planar");
      v_.push_back({v[0], v[1]});
    }
    double area2 = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) area2 += cross(v_[i], v_[(i + 1) % v_.size()]);
    require(area2 != 0.0, "degenerate polygon");
    if (area2 < 0.0) std::reverse(v_.begin(), v_.end());  // counter-clockwise from here on

    const std::size_t n = v_.size();
    corners_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 prev = v_[(i + n - 1) % n], cur = v_[i], next = v_[(i + 1) % n];
      const Vec2 din = (1.0 / length(cur - prev)) * (cur - prev);
      const Vec2 dout = (1.0 / length(next - cur)) * (next - cur);
      const double turn = std::atan2(cross(din, dout), dot(din, dout));
      require(std::abs(turn) > 1e-12 && std::abs(turn) < std::numbers::pi - 1e-9,
              "rounded polygon has a straight or folded corner");
      Corner& c = corners_[i];
      c.vertex = cur;
      c.convex = turn > 0.0;
      const double tangent = rho_ * std::tan(0.5 * std::abs(turn));
      c.t_in = cur - tangent * din;
      c.t_out = cur + tangent * dout;
      const Vec2 left_normal{-din.y, din.x};
      c.center = c.t_in + (c.convex ? rho_ : -rho_) * left_normal;
      c.tangent_length = tangent;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Corner& a = corners_[i];
      const Corner& b = corners_[(i + 1) % n];
      require(a.tangent_length + b.tangent_length <= length(b.vertex - a.vertex) * (1 + 1e-12),
              "corner radius too large for polygon edge");
    }
    lo_ = hi_ = v_[0];
    for (const auto& p : v_) {
      lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
      hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
    }
    min_edge_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) min_edge_ = std::min(min_edge_, length(v_[(i + 1) % n] - v_[i]));
  }

  PrimitiveKind kind() const override { return PrimitiveKind::RoundedPolygon; }
  int dim() const override { return 2; }
  bool exact() const override { return true; }
  double min_feature() const override { return 0.5 * min_edge_; }
  double c11_radius() const override { return rho_; }

  double sdf(std::span<const double> x) const override {
    require_dim(x, 2);
    const Vec2 p{x[0], x[1]};
    const std::size_t n = corners_.size();
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const Corner& c = corners_[i];
      dist = std::min(dist, segment_distance(p, c.t_out, corners_[(i + 1) % n].t_in));
      dist = std::min(dist, arc_distance(p, c));
    }
    return inside(p) ? dist : -dist;
  }

  BoundingBox bbox() const override {
    // Fillets only pull the boundary inward at convex corners; concave
    // fillets stay within the sharp polygon's hull as well.
    return {{lo_.x, lo_.y}, {hi_.x, hi_.y}};
  }

  json to_json() const override {
    return {{"kind", "rounded_polygon"}, {"params", {{"vertices", input_}, {"corner_radius", rho_}}}};
  }

  ShapePtr scaled(double f) const override {
    std::vector<Point> v;
    for (const auto& p : input_) v.push_back(scaled_point(p, f));
    return std::make_shared<RoundedPolygon>(std::move(v), rho_ * f);
  }

 private:
  struct Corner {
    Vec2 vertex, t_in, t_out, center;
    double tangent_length = 0.0;
    bool convex = true;
  };

  double arc_distance(Vec2 p, const Corner& c) const {
    const Vec2 a = c.t_in - c.center;
    const Vec2 b = c.t_out - c.center;
    const Vec2 q = p - c.center;
    const double s = cross(a, b);
    const bool in_sector = cross(a, q) * s >= 0.0 && cross(q, b) * s >= 0.0 && dot(q, a + b) > 0.0;
    if (in_sector) return std::abs(length(q) - rho_);
    return std::min(length(p - c.t_in), length(p - c.t_out));
  }

  bool inside(Vec2 p) const {
    bool in = false;
    const std::size_t n = v_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2 a = v_[i], b = v_[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    // Corner caps: convex fillets remove a sliver, concave fillets add one.
    for (const Corner& c : corners_) {
      if (in_triangle(p, c.vertex, c.t_in, c.t_out) && length(p - c.center) > rho_) {
        in = !c.convex;
      }
    }
    return in;
  }

  std::vector<Point> input_;
  std::vector<Vec2> v_;
  std::vector<Corner> corners_;
  double rho_;
  double min_edge_ = 0.0;
  Vec2 lo_{}, hi_{};
};

// ---- union -------------------------------------------------------------------

bool closures_disjoint(const Shape& a, const Shape& b) {
  if (!a.bbox().overlaps(b.bbox())) return true;
  if (a.kind() == PrimitiveKind::Ball && b.kind() == PrimitiveKind::Ball) {
    const auto& ba = static_cast<const Ball&>(a);
    const auto& bb = static_cast<const Ball&>(b);
    double s = 0.0;
    for (std::size_t i = 0; i < ba.center().size(); ++i) {
      const double d = ba.center()[i] - bb.center()[i];
      s += d * d;
    }
    return std::sqrt(s) > ba.radius() + bb.radius();
  }
  return false;
}

class Union final : public Shape {
 public:
  explicit Union(std::vector<ShapePtr> children) : children_(std::move(children)) {
    require(!children_.empty(), "union needs at least one child");
    for (const auto& c : children_) {
      require(c != nullptr, "null union child");
      require(c->dim() == children_[0]->dim(), "union children must share a dimension");
    }
    exact_ = std::all_of(children_.begin(), children_.end(), [](const ShapePtr& c) { return c->exact(); });
    for (std::size_t i = 0; i < children_.size() && exact_; ++i) {
      for (std::size_t j = i + 1; j < children_.size(); ++j) {
        if (!closures_disjoint(*children_[i], *children_[j])) {
          exact_ = false;
          break;
        }
      }
    }
    bbox_ = children_[0]->bbox();
    for (const auto& c : children_) {
      const auto b = c->bbox();
      for (int i = 0; i < b.dim(); ++i) {
        bbox_.lo[i] = std::min(bbox_.lo[i], b.lo[i]);
        bbox_.hi[i] = std::max(bbox_.hi[i], b.hi[i]);
      }
    }
  }

  PrimitiveKind kind() const override { return PrimitiveKind::Union; }
  int dim() const override { return children_[0]->dim(); }
  bool exact() const override { return exact_; }
  BoundingBox bbox() const override { return bbox_; }

  double sdf(std::span<const double> x) const override {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : children_) best = std::max(best, c->sdf(x));
    return best;
  }

  double min_feature() const override {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : children_) m = std::min(m, c->min_feature());
    return m;
  }

  double c11_radius() const override {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& c : children_) r = std::min(r, c->c11_radius());
    // Exterior balls must also fit between the pieces.
    for (std::size_t i = 0; i < children_.size(); ++i) {
      for (std::size_t j = i + 1; j < children_.size(); ++j) {
        r = std::min(r, 0.5 * gap(*children_[i], *children_[j]));
      }
    }
    return r;
  }

  json to_json() const override {
    json kids = json::array();
    for (const auto& c : children_) kids.push_back(c->to_json());
    return {{"kind", "union"}, {"children", kids}};
  }

  void collect_primitives(std::vector<PrimitiveDescriptor>& out) const override {
    for (const auto& c : children_) c->collect_primitives(out);
  }

  ShapePtr scaled(double f) const override {
    std::vector<ShapePtr> kids;
    for (const auto& c : children_) kids.push_back(c->scaled(f));
    return std::make_shared<Union>(std::move(kids));
  }

 private:
  // Lower bound on the distance between two pieces; exact for pairs of balls
  // and for axis-aligned boxes separated along one axis.
  static double gap(const Shape& a, const Shape& b) {
    if (a.kind() == PrimitiveKind::Ball && b.kind() == PrimitiveKind::Ball) {
      const auto& ba = static_cast<const Ball&>(a);
      const auto& bb = static_cast<const Ball&>(b);
      double s = 0.0;
      for (std::size_t i = 0; i < ba.center().size(); ++i) {
        const double d = ba.center()[i] - bb.center()[i];
        s += d * d;
      }
      return std::max(0.0, std::sqrt(s) - ba.radius() - bb.radius());
    }
    const auto A = a.bbox(), B = b.bbox();
    double s = 0.0;
    for (int i = 0; i < A.dim(); ++i) {
      const double d = std::max({0.0, B.lo[i] - A.hi[i], A.lo[i] - B.hi[i]});
      s += d * d;
    }
    return std::sqrt(s);
  }

  std::vector<ShapePtr> children_;
  bool exact_ = true;
  BoundingBox bbox_;
};

// ---- JSON --------------------------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + ": expected an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw Error(ErrorCode::ConfigError, where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_param(const json& params, const char* key, const std::string& kind) {
  if (!params.contains(key)) {
    throw Error(ErrorCode::ConfigError, kind + ": missing parameter '" + key + "'");
  }
  try {
    return params.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, kind + ": bad parameter '" + key + "': " + e.what());
  }
}

ShapePtr shape_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorCode::ConfigError, "shape needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "union") {
      check_keys(j, {"kind", "children"}, "union");
      if (!j.contains("children") || !j.at("children").is_array()) {
        throw Error(ErrorCode::ConfigError, "union: 'children' must be an array");
      }
      std::vector<ShapePtr> kids;
      for (const auto& c : j.at("children")) kids.push_back(shape_from_json(c));
      return make_union(std::move(kids));
    }
    check_keys(j, {"kind", "params"}, kind);
    const json params = j.value("params", json::object());
    if (kind == "ball") {
      check_keys(params, {"center", "radius"}, kind);
      return make_ball(get_param<Point>(params, "center", kind), get_param<double>(params, "radius", kind));
    }
    if (kind == "rounded_box") {
      check_keys(params, {"center", "half_widths", "corner_radius"}, kind);
      return make_rounded_box(get_param<Point>(params, "center", kind),
                              get_param<Point>(params, "half_widths", kind),
                              get_param<double>(params, "corner_radius", kind));
    }
    if (kind == "rotated_rounded_box") {
      check_keys(params, {"center", "half_widths", "corner_radius", "angle_deg"}, kind);
      return make_rotated_rounded_box(get_param<Point>(params, "center", kind),
                                      get_param<Point>(params, "half_widths", kind),
                                      get_param<double>(params, "corner_radius", kind),
                                      get_param<double>(params, "angle_deg", kind));
    }
    if (kind == "rounded_polygon") {
      check_keys(params, {"vertices", "corner_radius"}, kind);
      return make_rounded_polygon(get_param<std::vector<Point>>(params, "vertices", kind),
                                  get_param<double>(params, "corner_radius", kind));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::ConfigError, e.what());
    throw;
  }
  throw Error(ErrorCode::ConfigError, "unknown shape kind '" + kind + "'");
}

// Deterministic directions on the unit sphere for the fallback ball test.
std::vector<Point> sphere_directions(int dim, int count) {
  std::vector<Point> dirs;
  dirs.reserve(count);
  if (dim == 1) return {{-1.0}, {1.0}};
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  RandomStream stream(0x5EED5, static_cast<std::uint64_t>(dim), 0, StreamPurpose::DomainSampling);
  while (static_cast<int>(dirs.size()) < count) {
    Point v(dim);
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
      v[k] = 2.0 * stream.next_uniform() - 1.0;
      s += v[k] * v[k];
    }
    if (s > 1.0 || s < 1e-6) continue;
    for (double& c : v) c /= std::sqrt(s);
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace

// ---- public --------------------------------------------------------------------

double BoundingBox::diameter() const {
  double s = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
  return std::sqrt(s);
}

bool BoundingBox::overlaps(const BoundingBox& other) const {
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (hi[i] < other.lo[i] || other.hi[i] < lo[i]) return false;
  }
  return true;
}

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Ball: return "ball";
    case PrimitiveKind::RoundedBox: return "rounded_box";
    case PrimitiveKind::RotatedRoundedBox: return "rotated_rounded_box";
    case PrimitiveKind::RoundedPolygon: return "rounded_polygon";
    case PrimitiveKind::Union: return "union";
  }
  return "unknown";
}

void Shape::collect_primitives(std::vector<PrimitiveDescriptor>& out) const {
  out.push_back({kind(), to_json().at("params")});
}

ShapePtr make_ball(Point center, double radius) {
  return std::make_shared<Ball>(std::move(center), radius);
}
ShapePtr make_rounded_box(Point center, Point half_widths, double corner_radius) {
  return std::make_shared<RoundedBox>(std::move(center), std::move(half_widths), corner_radius);
}
ShapePtr make_rotated_rounded_box(Point center, Point half_widths, double corner_radius, double angle_deg) {
  return std::make_shared<RotatedRoundedBox>(std::move(center), std::move(half_widths), corner_radius,
                                             angle_deg);
}
ShapePtr make_rounded_polygon(std::vector<Point> vertices, double corner_radius) {
  return std::make_shared<RoundedPolygon>(std::move(vertices), corner_radius);
}
ShapePtr make_union(std::vector<ShapePtr> children) {
  return std::make_shared<Union>(std::move(children));
}

Domain::Domain(ShapePtr shape, std::string name) : shape_(std::move(shape)), name_(std::move(name)) {
  require(shape_ != nullptr, "domain needs a shape");
  bbox_ = shape_->bbox();
}

bool Domain::ball_inside(std::span<const double> center, double radius) const {
  require(radius > 0.0, "ball_inside radius must be positive");
  const double s = signed_distance(center);
  const double slack = 1e-12 * std::max(1.0, radius);
  if (s >= radius - slack) return true;
  if (exact_sdf() || s <= 0.0) return false;
  static const int kSamples = 256;
  const auto dirs = sphere_directions(dim(), kSamples);
  Point q(center.begin(), center.end());
  for (const auto& dir : dirs) {
    for (int k = 0; k < dim(); ++k) q[k] = center[k] + radius * dir[k];
    if (signed_distance(q) < -slack) return false;
  }
  return true;
}

std::vector<PrimitiveDescriptor> Domain::components() const {
  std::vector<PrimitiveDescriptor> out;
  shape_->collect_primitives(out);
  return out;
}

json Domain::to_json() const {
  json j = shape_->to_json();
  j["name"] = name_;
  if (c11_radius_) j["c11_radius"] = *c11_radius_;
  if (c11_lambda_) j["c11_lambda"] = *c11_lambda_;
  return j;
}

Domain Domain::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "domain descriptor must be an object");
  json shape_json = j;
  std::string name = "custom";
  std::optional<double> radius, lambda;
  if (j.contains("name")) name = j.at("name").get<std::string>();
  if (j.contains("c11_radius")) radius = j.at("c11_radius").get<double>();
  if (j.contains("c11_lambda")) lambda = j.at("c11_lambda").get<double>();
  shape_json.erase("name");
  shape_json.erase("c11_radius");
  shape_json.erase("c11_lambda");
  Domain d(shape_from_json(shape_json), name);
  if (radius || lambda) {
    const double r = radius.value_or(d.shape().c11_radius());
    d.set_c11(r, lambda.value_or(1.0 / r));
  }
  return d;
}

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {"disc",         "parallel_balls",     "rounded_square",
                                                 "four_squares", "nested_channel_6_1", "tilted_rect_6_2",
                                                 "diagonal_balls_6_3"};
  return names;
}

Domain paper_domain(const std::string& name, double scale) {
  require(scale > 0.0 && std::isfinite(scale), "domain scale must be positive");
  ShapePtr shape;
  if (name == "disc") {
    shape = make_ball({0.0, 0.0}, 1.0);
  } else if (name == "parallel_balls") {
    shape = make_union({make_ball({-1.3, 1.1}, 1.0), make_ball({1.3, 1.1}, 1.0)});
  } else if (name == "rounded_square") {
    shape = make_rounded_box({0.0, 0.0}, {1.0, 1.0}, 0.25);
  } else if (name == "four_squares") {
    std::vector<ShapePtr> squares;
    for (const auto& c : std::vector<Point>{{0, 0}, {3, 0}, {3, 3}, {6, 3}}) {
      squares.push_back(make_rounded_box(c, {1.0, 1.0}, 0.25));
    }
    shape = make_union(std::move(squares));
  } else if (name == "nested_channel_6_1") {
    shape = make_rounded_polygon(
        {{1, -1}, {-5, -1}, {-5, 9}, {5, 9}, {5, 3}, {3, 3}, {3, 7}, {-3, 7}, {-3, 1}, {1, 1}}, 0.25);
  } else if (name == "tilted_rect_6_2") {
    shape = make_rotated_rounded_box({0.0, 0.0}, {6.0 * std::numbers::sqrt2, 2.0}, 0.5, 45.0);
  } else if (name == "diagonal_balls_6_3") {
    shape = make_union({make_ball({-1.1, -1.1}, 1.0), make_ball({1.1, 1.1}, 1.0)});
  } else {
    throw Error(ErrorCode::UnknownDomain, "unknown catalog domain '" + name + "'");
  }
  if (scale != 1.0) shape = shape->scaled(scale);
  Domain d(shape, name);
  const double r = shape->c11_radius();
  d.set_c11(r, 1.0 / r);
  return d;
}

Domain load_domain(const std::string& id_or_path) {
  const auto& names = catalog_names();
  if (std::find(names.begin(), names.end(), id_or_path) != names.end()) return paper_domain(id_or_path);
  std::ifstream in(id_or_path);
  if (!in) throw Error(ErrorCode::UnknownDomain, "no catalog domain or readable file '" + id_or_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "cannot parse domain file: " + std::string(e.what()));
  }
  return Domain::from_json(j);
}

}  // namespace cylstable
