#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cylstable {

using Point = std::vector<double>;

struct BoundingBox {
  Point lo;
  Point hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double diameter() const;
  bool overlaps(const BoundingBox& other) const;  // closed boxes
};

enum class PrimitiveKind { Ball, RoundedBox, RotatedRoundedBox, RoundedPolygon, Union };

std::string to_string(PrimitiveKind kind);

struct PrimitiveDescriptor {
  PrimitiveKind kind;
  nlohmann::json params;
};

// Node of an implicit geometry tree. sdf() is positive inside; for exact()
// shapes it equals the distance to the complement inside and minus the
// distance to the set outside.
class Shape {
 public:
  virtual ~Shape() = default;
  virtual PrimitiveKind kind() const = 0;
  virtual int dim() const = 0;
  virtual double sdf(std::span<const double> x) const = 0;
  virtual bool exact() const = 0;
  virtual BoundingBox bbox() const = 0;
  // Smallest radius / half-width of the shape.
  virtual double min_feature() const = 0;
  // Interior/exterior ball radius of the boundary (C^{1,1} characteristic).
  virtual double c11_radius() const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual void collect_primitives(std::vector<PrimitiveDescriptor>& out) const;
  virtual std::shared_ptr<const Shape> scaled(double factor) const = 0;
};

using ShapePtr = std::shared_ptr<const Shape>;

ShapePtr make_ball(Point center, double radius);
ShapePtr make_rounded_box(Point center, Point half_widths, double corner_radius);
ShapePtr make_rotated_rounded_box(Point center, Point half_widths, double corner_radius, double angle_deg);
// Simple polygon (either orientation) with every corner, convex or concave,
// replaced by a circular fillet of the given radius.
ShapePtr make_rounded_polygon(std::vector<Point> vertices, double corner_radius);
ShapePtr make_union(std::vector<ShapePtr> children);

// Immutable open set with signed distance and C^{1,1} metadata.
class Domain {
 public:
  explicit Domain(ShapePtr shape, std::string name = "custom");

  const std::string& name() const noexcept { return name_; }
  int dim() const { return shape_->dim(); }
  const Shape& shape() const noexcept { return *shape_; }

  double signed_distance(std::span<const double> x) const { return shape_->sdf(x); }
  bool contains(std::span<const double> x) const { return shape_->sdf(x) > 0.0; }
  bool exact_sdf() const { return shape_->exact(); }
  const BoundingBox& bbox() const noexcept { return bbox_; }
  double min_feature() const { return shape_->min_feature(); }

  // True iff the closed ball B(center, radius) minus its boundary lies in D.
  // Exact when exact_sdf(); otherwise a true verdict from the SDF is sound and
  // a false one is re-checked by 256 boundary samples of the ball.
  bool ball_inside(std::span<const double> center, double radius) const;

  std::optional<double> c11_radius() const { return c11_radius_; }
  std::optional<double> c11_lambda() const { return c11_lambda_; }
  void set_c11(double radius, double lambda) {
    c11_radius_ = radius;
    c11_lambda_ = lambda;
  }

  std::vector<PrimitiveDescriptor> components() const;

  nlohmann::json to_json() const;
  static Domain from_json(const nlohmann::json& j);

 private:
  ShapePtr shape_;
  std::string name_;
  BoundingBox bbox_;
  std::optional<double> c11_radius_;
  std::optional<double> c11_lambda_;
};

// Catalog of the planar sets used throughout: disc, parallel_balls,
// rounded_square, four_squares, nested_channel_6_1, tilted_rect_6_2,
// diagonal_balls_6_3. Coordinates are multiplied by `scale`.
Domain paper_domain(const std::string& name, double scale = 1.0);
const std::vector<std::string>& catalog_names();

// Catalog id or path to a JSON descriptor.
Domain load_domain(const std::string& id_or_path);

}  // namespace cylstable
