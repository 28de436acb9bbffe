#pragma once

#include <Eigen/Core>

#include <optional>
#include <string_view>

namespace detkit {

/// Axis-aligned box in corner form. Corner storage is canonical; centers and
/// sides are derived. Valid boxes have strictly positive width and height.
struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double area() const { return width() * height(); }
    bool valid() const;
};

/// Throws std::invalid_argument naming `what` if the box is degenerate.
void require_valid(const BBox& b, const char* what);

/// Geometry of the smallest box enclosing both inputs.
struct EnclosureGeometry {
    double c_w = 0;          // enclosing width
    double c_h = 0;          // enclosing height
    double c = 0;            // enclosing diagonal, c^2 == c_w^2 + c_h^2
    double rho2_center = 0;  // squared distance between box centers
};
EnclosureGeometry enclosure(const BBox& a, const BBox& b);

enum class LossVariant { IOU, CIOU, EIOU, AIOU };

std::string_view to_string(LossVariant v);
std::optional<LossVariant> parse_variant(std::string_view name);

/// Additive breakdown of a loss value. Zero terms mean "not part of this
/// variant"; value always reconstructs as the sum.
struct LossTerms {
    double overlap = 0;  // 1 - IoU
    double center = 0;   // rho^2(b, b_gt) / (c_w^2 + c_h^2)
    double aspect = 0;   // alpha * v
    double width = 0;    // (w - w_gt)^2 / c_w^2
    double height = 0;   // (h - h_gt)^2 / c_h^2
    double sum() const { return overlap + center + aspect + width + height; }
};

struct LossReport {
    LossVariant variant = LossVariant::IOU;
    double value = 0;
    double iou = 0;
    Eigen::Vector4d grad = Eigen::Vector4d::Zero();  // d value / d (x1,y1,x2,y2) of pred
    LossTerms terms;
    double v = 0;      // aspect-ratio consistency
    double alpha = 0;  // aspect trade-off, 0 when v == 0
};

/// Intersection over union in [0, 1]; 0 for disjoint boxes, 1 iff identical.
double iou(const BBox& a, const BBox& b);

LossReport iou_loss(const BBox& pred, const BBox& gt);
LossReport ciou_loss(const BBox& pred, const BBox& gt);
LossReport eiou_loss(const BBox& pred, const BBox& gt);
LossReport aiou_loss(const BBox& pred, const BBox& gt);

/// Variant dispatch.
LossReport loss(LossVariant variant, const BBox& pred, const BBox& gt);

/// Loss value with the aspect trade-off pinned to a caller-supplied constant.
/// The analytic gradients of CIoU/AIoU treat alpha as constant, so central
/// differences must evaluate the same frozen-alpha function.
double loss_value_frozen_alpha(LossVariant variant, const BBox& pred, const BBox& gt,
                               double alpha);

/// True if any min/max branch in the pair's geometry is within `margin` of a
/// tie (coincident or osculating edges). At such points the loss has a
/// subgradient, not a gradient, and finite differences are unreliable.
bool near_kink(const BBox& pred, const BBox& gt, double margin);

}  // namespace detkit
