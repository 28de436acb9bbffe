#include "detkit/box.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace detkit {

namespace {

constexpr double kAspectScale = 4.0 / (std::numbers::pi * std::numbers::pi);

// Everything the loss family needs about one pred/gt pair, including the
// partial derivatives of the building blocks with respect to the predicted
// corners (x1, y1, x2, y2). Ties in min/max branches resolve to the
// pred-determines branch; those configurations are kinks and are excluded
// from finite-difference comparisons.
struct PairGeometry {
    double w, h, wg, hg;
    double iou;
    double rho2, c2, cw, ch;
    double v;      // aspect-ratio consistency
    double alpha;  // v / ((1 - iou) + v), 0 when v == 0

    Eigen::Vector4d d_iou;
    Eigen::Vector4d d_rho2;
    Eigen::Vector4d d_cw, d_ch;
    Eigen::Vector4d d_v;

    Eigen::Vector4d d_center_term() const {
        // d/dp [rho2 / c2], c2 = cw^2 + ch^2
        Eigen::Vector4d d_c2 = 2.0 * cw * d_cw + 2.0 * ch * d_ch;
        return (d_rho2 * c2 - rho2 * d_c2) / (c2 * c2);
    }
    Eigen::Vector4d d_width_term() const {
        // d/dp [(w - wg)^2 / cw^2]
        Eigen::Vector4d dw(-1, 0, 1, 0);
        return 2.0 * (w - wg) * dw / (cw * cw) -
               2.0 * (w - wg) * (w - wg) * d_cw / (cw * cw * cw);
    }
    Eigen::Vector4d d_height_term() const {
        Eigen::Vector4d dh(0, -1, 0, 1);
        return 2.0 * (h - hg) * dh / (ch * ch) -
               2.0 * (h - hg) * (h - hg) * d_ch / (ch * ch * ch);
    }
};

PairGeometry analyze(const BBox& p, const BBox& g) {
    require_valid(p, "pred");
    require_valid(g, "gt");

    PairGeometry geo{};
    geo.w = p.width();
    geo.h = p.height();
    geo.wg = g.width();
    geo.hg = g.height();

    const double iw = std::min(p.x2, g.x2) - std::max(p.x1, g.x1);
    const double ih = std::min(p.y2, g.y2) - std::max(p.y1, g.y1);
    const bool overlapping = iw > 0 && ih > 0;
    const double inter = overlapping ? iw * ih : 0.0;
    const double uni = p.area() + g.area() - inter;
    geo.iou = inter / uni;

    // Exact edge ties take the midpoint subgradient; that is what makes the
    // gradient vanish at pred == gt instead of picking up a one-sided IoU
    // slope. Tied configurations are kinks and excluded from FD checks.
    const auto pick = [](double pred_edge, double gt_edge, double lo, double hi) {
        if (pred_edge == gt_edge) return 0.5 * (lo + hi);
        return pred_edge > gt_edge ? hi : lo;
    };
    Eigen::Vector4d d_inter = Eigen::Vector4d::Zero();
    if (overlapping) {
        d_inter[0] = pick(p.x1, g.x1, 0.0, -ih);
        d_inter[1] = pick(p.y1, g.y1, 0.0, -iw);
        d_inter[2] = pick(p.x2, g.x2, ih, 0.0);
        d_inter[3] = pick(p.y2, g.y2, iw, 0.0);
    }
    const Eigen::Vector4d d_area(-geo.h, -geo.w, geo.h, geo.w);
    const Eigen::Vector4d d_uni = d_area - d_inter;
    geo.d_iou = (uni * d_inter - inter * d_uni) / (uni * uni);

    geo.cw = std::max(p.x2, g.x2) - std::min(p.x1, g.x1);
    geo.ch = std::max(p.y2, g.y2) - std::min(p.y1, g.y1);
    geo.c2 = geo.cw * geo.cw + geo.ch * geo.ch;
    geo.d_cw = Eigen::Vector4d((p.x1 <= g.x1) ? -1.0 : 0.0, 0.0, (p.x2 >= g.x2) ? 1.0 : 0.0, 0.0);
    geo.d_ch = Eigen::Vector4d(0.0, (p.y1 <= g.y1) ? -1.0 : 0.0, 0.0, (p.y2 >= g.y2) ? 1.0 : 0.0);

    const double dcx = p.cx() - g.cx();
    const double dcy = p.cy() - g.cy();
    geo.rho2 = dcx * dcx + dcy * dcy;
    geo.d_rho2 = Eigen::Vector4d(dcx, dcy, dcx, dcy);  // d center / d corner = 1/2

    const double q = std::atan(geo.wg / geo.hg) - std::atan(geo.w / geo.h);
    geo.v = kAspectScale * q * q;
    geo.alpha = (geo.v == 0.0) ? 0.0 : geo.v / ((1.0 - geo.iou) + geo.v);
    const double dq_dw = -geo.h / (geo.w * geo.w + geo.h * geo.h);
    const double dq_dh = geo.w / (geo.w * geo.w + geo.h * geo.h);
    const double dv_dw = 2.0 * kAspectScale * q * dq_dw;
    const double dv_dh = 2.0 * kAspectScale * q * dq_dh;
    geo.d_v = Eigen::Vector4d(-dv_dw, -dv_dh, dv_dw, dv_dh);

    return geo;
}

LossReport assemble(LossVariant variant, const PairGeometry& geo) {
    LossReport rep;
    rep.variant = variant;
    rep.iou = geo.iou;
    rep.v = geo.v;
    rep.alpha = geo.alpha;
    rep.terms.overlap = 1.0 - geo.iou;

    Eigen::Vector4d grad = -geo.d_iou;
    switch (variant) {
        case LossVariant::IOU:
            break;
        case LossVariant::CIOU:
            rep.terms.center = geo.rho2 / geo.c2;
            rep.terms.aspect = geo.alpha * geo.v;
            grad += geo.d_center_term() + geo.alpha * geo.d_v;
            break;
        case LossVariant::EIOU:
            rep.terms.center = geo.rho2 / geo.c2;
            rep.terms.width = (geo.w - geo.wg) * (geo.w - geo.wg) / (geo.cw * geo.cw);
            rep.terms.height = (geo.h - geo.hg) * (geo.h - geo.hg) / (geo.ch * geo.ch);
            grad += geo.d_center_term() + geo.d_width_term() + geo.d_height_term();
            break;
        case LossVariant::AIOU:
            rep.terms.center = geo.rho2 / geo.c2;
            rep.terms.aspect = geo.alpha * geo.v;
            rep.terms.width = (geo.w - geo.wg) * (geo.w - geo.wg) / (geo.cw * geo.cw);
            rep.terms.height = (geo.h - geo.hg) * (geo.h - geo.hg) / (geo.ch * geo.ch);
            grad += geo.d_center_term() + geo.alpha * geo.d_v + geo.d_width_term() +
                    geo.d_height_term();
            break;
    }
    rep.value = rep.terms.sum();
    rep.grad = grad;
    return rep;
}

}  // namespace

bool BBox::valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x2 > x1 && y2 > y1;
}

void require_valid(const BBox& b, const char* what) {
    if (!b.valid())
        throw std::invalid_argument(std::string(what) + " box is degenerate: [" +
                                    std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                                    std::to_string(b.x2) + ", " + std::to_string(b.y2) +
                                    "] (needs x2 > x1 and y2 > y1)");
}

EnclosureGeometry enclosure(const BBox& a, const BBox& b) {
    require_valid(a, "first");
    require_valid(b, "second");
    EnclosureGeometry e;
    e.c_w = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    e.c_h = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    e.c = std::hypot(e.c_w, e.c_h);
    const double dx = a.cx() - b.cx();
    const double dy = a.cy() - b.cy();
    e.rho2_center = dx * dx + dy * dy;
    return e;
}

std::string_view to_string(LossVariant v) {
    switch (v) {
        case LossVariant::IOU: return "iou";
        case LossVariant::CIOU: return "ciou";
        case LossVariant::EIOU: return "eiou";
        case LossVariant::AIOU: return "aiou";
    }
    return "?";
}

std::optional<LossVariant> parse_variant(std::string_view name) {
    if (name == "iou") return LossVariant::IOU;
    if (name == "ciou") return LossVariant::CIOU;
    if (name == "eiou") return LossVariant::EIOU;
    if (name == "aiou") return LossVariant::AIOU;
    return std::nullopt;
}

double iou(const BBox& a, const BBox& b) {
    require_valid(a, "first");
    require_valid(b, "second");
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

LossReport iou_loss(const BBox& pred, const BBox& gt) {
    return assemble(LossVariant::IOU, analyze(pred, gt));
}
LossReport ciou_loss(const BBox& pred, const BBox& gt) {
    return assemble(LossVariant::CIOU, analyze(pred, gt));
}
LossReport eiou_loss(const BBox& pred, const BBox& gt) {
    return assemble(LossVariant::EIOU, analyze(pred, gt));
}
LossReport aiou_loss(const BBox& pred, const BBox& gt) {
    return assemble(LossVariant::AIOU, analyze(pred, gt));
}

LossReport loss(LossVariant variant, const BBox& pred, const BBox& gt) {
    return assemble(variant, analyze(pred, gt));
}

double loss_value_frozen_alpha(LossVariant variant, const BBox& pred, const BBox& gt,
                               double alpha) {
    const PairGeometry geo = analyze(pred, gt);
    double value = 1.0 - geo.iou;
    if (variant == LossVariant::IOU) return value;
    value += geo.rho2 / geo.c2;
    if (variant == LossVariant::CIOU || variant == LossVariant::AIOU) value += alpha * geo.v;
    if (variant == LossVariant::EIOU || variant == LossVariant::AIOU)
        value += (geo.w - geo.wg) * (geo.w - geo.wg) / (geo.cw * geo.cw) +
                 (geo.h - geo.hg) * (geo.h - geo.hg) / (geo.ch * geo.ch);
    return value;
}

bool near_kink(const BBox& pred, const BBox& gt, double margin) {
    const double gaps[] = {
        pred.x1 - gt.x1, pred.x2 - gt.x2, pred.y1 - gt.y1, pred.y2 - gt.y2,  // coincident edges
        pred.x2 - gt.x1, pred.x1 - gt.x2, pred.y2 - gt.y1, pred.y1 - gt.y2,  // osculating edges
    };
    return std::any_of(std::begin(gaps), std::end(gaps),
                       [margin](double g) { return std::abs(g) < margin; });
}

}  // namespace detkit
