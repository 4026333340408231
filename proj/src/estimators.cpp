#include "dsmedian/estimators.hpp"

#include "dsmedian/core_stats.hpp"
#include "dsmedian/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dsmedian {

SampleView::SampleView(std::vector<double> x_m, std::vector<double> y_m, std::vector<double> z_m,
                       std::vector<double> x_n, std::vector<double> z_n,
                       std::optional<double> known_mx, double known_mz)
    : x_m_(std::move(x_m)), y_m_(std::move(y_m)), z_m_(std::move(z_m)),
      x_n_(std::move(x_n)), z_n_(std::move(z_n)), known_mx_(known_mx), known_mz_(known_mz) {
    if (y_m_.empty() || x_n_.empty()) throw InvalidInput("empty sample");
    if (x_m_.size() != y_m_.size() || z_m_.size() != y_m_.size())
        throw InvalidInput("second-phase columns differ in length");
    if (z_n_.size() != x_n_.size()) throw InvalidInput("first-phase columns differ in length");
    if (y_m_.size() > x_n_.size()) throw InvalidInput("second phase larger than first phase");
    if (!std::isfinite(known_mz_) || (known_mx_ && !std::isfinite(*known_mx_))) throw InvalidInput("invalid datum");
    medians_.y = sample_median(y_m_);
    medians_.x = sample_median(x_m_);
    medians_.z = sample_median(z_m_);
    medians_.x_first = sample_median(x_n_);
    medians_.z_first = sample_median(z_n_);
}

SampleView SampleView::from_population(const Population& pop, const TwoPhaseSample& sample,
                                       std::optional<double> known_mx, double known_mz) {
    auto gather = [](const std::vector<double>& col, const std::vector<std::size_t>& idx) {
        std::vector<double> out;
        out.reserve(idx.size());
        for (auto i : idx) {
            if (i >= col.size()) throw InvalidInput("sample index out of range");
            out.push_back(col[i]);
        }
        return out;
    };
    return SampleView(gather(pop.x(), sample.second_phase), gather(pop.y(), sample.second_phase),
                      gather(pop.z(), sample.second_phase), gather(pop.x(), sample.first_phase),
                      gather(pop.z(), sample.first_phase), known_mx, known_mz);
}

double SampleView::u() const {
    if (medians_.x_first == 0.0) throw DegenerateModel("u undefined: first-phase median of x is zero");
    return medians_.x / medians_.x_first;
}

double SampleView::v() const {
    if (known_mz_ == 0.0) throw DegenerateModel("v undefined: M_Z is zero");
    return medians_.z_first / known_mz_;
}

double SampleView::w() const {
    if (known_mz_ == 0.0) throw DegenerateModel("w undefined");
    return medians_.z / known_mz_;
}

SampleMedians sample_medians(const SampleView& view) { return view.medians(); }

namespace {

double require_known_mx(const SampleView& view) {
    if (!view.known_mx()) throw InvalidInput("estimator needs the population median of x");
    return *view.known_mx();
}

}  // namespace

double ratio_known(const SampleView& view) {
    const double mx = require_known_mx(view);
    const auto& med = view.medians();
    if (med.x == 0.0) throw DegenerateModel("ratio undefined");
    return med.y * mx / med.x;
}

PositionResult position_estimator(const SampleView& view, PositionForm form) {
    const double mx = require_known_mx(view);
    const std::size_t m = view.m();
    if (m < 2) throw InvalidInput("position estimator needs m >= 2");
    const auto& med = view.medians();
    const auto& xs = view.x_second();
    const auto m_x = static_cast<double>(std::count_if(xs.begin(), xs.end(), [mx](double x) { return x <= mx; }));
    const double md = static_cast<double>(m);
    const auto pm = proportion_matrix(xs, view.y_second(), med.x, med.y);

    double p = 0.0;
    if (form == PositionForm::Approximate) {
        p = 2.0 * (m_x * pm.p11() + (md - m_x) * pm.p12()) / md;
    } else {
        const double low = pm.row_a_low();
        const double high = 1.0 - low;
        const double t1 = low > 0.0 ? m_x * pm.p11() / low : 0.0;
        const double t2 = high > 0.0 ? (md - m_x) * pm.p12() / high : 0.0;
        p = (t1 + t2) / md;
    }
    PositionResult r;
    r.p_hat = std::clamp(p, 1.0 / md, 1.0);
    r.clamped = r.p_hat != p;
    r.estimate = empirical_quantile(view.y_second(), r.p_hat);
    return r;
}

double stratification_estimator(const SampleView& view) {
    const double mx = require_known_mx(view);
    std::vector<double> a, b;
    const auto& xs = view.x_second();
    const auto& ys = view.y_second();
    for (std::size_t i = 0; i < ys.size(); ++i) (xs[i] <= mx ? a : b).push_back(ys[i]);
    if (a.empty() || b.empty()) throw DegenerateModel("stratification undefined");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> candidates(ys.begin(), ys.end());
    std::sort(candidates.begin(), candidates.end());
    const auto na = a.size();
    const auto nb = b.size();
    for (double y : candidates) {
        const auto ca = static_cast<std::size_t>(std::upper_bound(a.begin(), a.end(), y) - a.begin());
        const auto cb = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), y) - b.begin());
        // (ca/na + cb/nb) / 2 >= 1/2, in integers
        if (ca * nb + cb * na >= na * nb) return y;
    }
    return candidates.back();  // unreachable: the maximum gives 1
}

double ratio_double(const SampleView& view) {
    const auto& med = view.medians();
    if (med.x == 0.0) throw DegenerateModel("ratio undefined");
    return med.y * med.x_first / med.x;
}

namespace {

struct CoefficientInputs {
    double mx, my, mz;
    double fx, fy, fz;
    double rho_xy, rho_yz, rho_xz;
};

Coefficients coefficients_from(const CoefficientInputs& in) {
    if (!(in.fy > 0.0)) throw DegenerateModel("zero density");
    if (in.my == 0.0) throw DegenerateModel("zero median of y");
    const double gap = 1.0 - in.rho_xz * in.rho_xz;
    if (!(gap > 0.0)) throw DegenerateModel("collinear auxiliaries");
    const double sx = in.mx * in.fx;
    const double sz = in.mz * in.fz;
    Coefficients c;
    c.d1 = in.fx / in.fy * in.rho_xy;
    c.d2 = in.fz / in.fy * in.rho_yz;
    c.alpha1_star = sx / in.fy * in.rho_xy;
    c.alpha2_star = sz / in.fy * in.rho_yz;
    c.alpha1 = c.alpha1_star / in.my;
    c.alpha2 = c.alpha2_star / in.my;
    const double x_part = in.rho_xy - in.rho_xz * in.rho_yz;
    const double z_part = in.rho_yz - in.rho_xy * in.rho_xz;
    c.a1 = x_part / gap * sx / in.fy;
    c.a2 = in.rho_xz * x_part / gap * sz / in.fy;
    c.a3 = z_part / gap * sz / in.fy;
    for (double v : {c.d1, c.d2, c.alpha1, c.alpha2, c.alpha1_star, c.alpha2_star, c.a1, c.a2, c.a3}) {
        if (!std::isfinite(v)) throw DegenerateModel("non-finite coefficient");
    }
    return c;
}

bool has_two_distinct(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) != v.end();
}

}  // namespace

Coefficients plugin_coefficients(const SampleView& view) {
    if (view.m() < 4) throw InvalidInput("plug-in coefficients need m >= 4");
    if (!has_two_distinct(view.x_second()) || !has_two_distinct(view.y_second()) ||
        !has_two_distinct(view.z_second()))
        throw InvalidInput("plug-in coefficients need two distinct values per variable");
    const auto& med = view.medians();
    const auto& xs = view.x_second();
    const auto& ys = view.y_second();
    const auto& zs = view.z_second();
    CoefficientInputs in{};
    in.mx = med.x;
    in.my = med.y;
    in.mz = med.z;
    in.fx = kde_at(xs, med.x).value;
    in.fy = kde_at(ys, med.y).value;
    in.fz = kde_at(zs, med.z).value;
    in.rho_xy = proportion_matrix(xs, ys, med.x, med.y).concordance();
    in.rho_yz = proportion_matrix(ys, zs, med.y, med.z).concordance();
    in.rho_xz = proportion_matrix(xs, zs, med.x, med.z).concordance();
    return coefficients_from(in);
}

Coefficients optimal_coefficients(const PopulationSummary& s) {
    return coefficients_from({s.median_x, s.median_y, s.median_z, s.density_x, s.density_y, s.density_z,
                              s.pm_xy.concordance(), s.pm_yz.concordance(), s.pm_xz.concordance()});
}

double regression_two_aux(const SampleView& view, const Coefficients& c) {
    const auto& med = view.medians();
    return med.y + c.d1 * (med.x_first - med.x) + c.d2 * (view.known_mz() - med.z_first);
}

double regression_single_aux(const SampleView& view, const Coefficients& c) {
    const auto& med = view.medians();
    return med.y + c.d1 * (med.x_first - med.x);
}

double evaluate_gform(const GForm& f, double u, double v) {
    const double du = u - 1.0;
    const double dv = v - 1.0;
    auto require_positive = [&](bool need_u, bool need_v) {
        if ((need_u && !(u > 0.0)) || (need_v && !(v > 0.0)))
            throw DegenerateModel("invalid ratio for power form");
    };
    switch (f.kind) {
    case GFormKind::G1:
        require_positive(true, true);
        return std::pow(u, f.alpha) * std::pow(v, f.beta);
    case GFormKind::G2: {
        const double den = 1.0 - f.beta * dv;
        if (den == 0.0) throw DegenerateModel("g2 denominator vanishes");
        return (1.0 + f.alpha * du) / den;
    }
    case GFormKind::G3:
        return 1.0 + f.alpha * du + f.beta * dv;
    case GFormKind::G4: {
        const double den = 1.0 - f.alpha * du - f.beta * dv;
        if (!(den > 0.0)) throw DegenerateModel("g4 denominator not positive");
        return 1.0 / den;
    }
    case GFormKind::G5:
        require_positive(true, true);
        if (std::abs(f.w1 + f.w2 - 1.0) > 1e-12) throw InvalidInput("g5 weights must sum to 1");
        // w1 u^a + w2 v^b written so that (1, 1) gives exactly 1
        return 1.0 + f.w1 * (std::pow(u, f.alpha) - 1.0) + f.w2 * (std::pow(v, f.beta) - 1.0);
    case GFormKind::G6:
        require_positive(false, true);
        return 1.0 + f.alpha * du + (1.0 - f.alpha) * (std::pow(v, f.beta) - 1.0);
    case GFormKind::G7:
        return std::exp(f.alpha * du + f.beta * dv);
    }
    throw std::logic_error("unknown g form");
}

GForm optimal_gform(GFormKind kind, double alpha1, double alpha2, double w1) {
    GForm f;
    f.kind = kind;
    f.alpha = -alpha1;
    f.beta = -alpha2;
    if (kind == GFormKind::G5) {
        if (!(w1 > 0.0 && w1 < 1.0)) throw InvalidInput("g5 weight must lie in (0, 1)");
        f.w1 = w1;
        f.w2 = 1.0 - w1;
        f.alpha = -alpha1 / f.w1;
        f.beta = -alpha2 / f.w2;
    } else if (kind == GFormKind::G6) {
        // dg/dv = (1 - alpha) beta
        if (1.0 + alpha1 == 0.0) throw DegenerateModel("g6 optimum undefined for alpha1 = -1");
        f.beta = -alpha2 / (1.0 + alpha1);
    }
    return f;
}

double class_g_estimate(const SampleView& view, const GForm& form) {
    return view.medians().y * evaluate_gform(form, view.u(), view.v());
}

double class_F_estimate(const SampleView& view, const Coefficients& c) {
    const double w = view.w();
    return view.medians().y - c.a1 * (view.u() - 1.0) - c.a2 * (view.v() - 1.0) - c.a3 * (w - 1.0);
}

// ---------------------------------------------------------------------------

namespace {

struct Entry {
    EstimatorId id;
    std::string_view name;
};

constexpr std::array kCatalog{
    Entry{EstimatorId::Median, "median"},
    Entry{EstimatorId::RatioKnown, "ratio-known"},
    Entry{EstimatorId::Position, "position"},
    Entry{EstimatorId::Stratified, "stratified"},
    Entry{EstimatorId::RatioDouble, "ratio-double"},
    Entry{EstimatorId::RegX, "reg-x"},
    Entry{EstimatorId::RegXZ, "reg-xz"},
    Entry{EstimatorId::G1, "g1"},
    Entry{EstimatorId::G2, "g2"},
    Entry{EstimatorId::G3, "g3"},
    Entry{EstimatorId::G4, "g4"},
    Entry{EstimatorId::G5, "g5"},
    Entry{EstimatorId::G6, "g6"},
    Entry{EstimatorId::G7, "g7"},
    Entry{EstimatorId::FLinear, "f-linear"},
    Entry{EstimatorId::RegXOpt, "reg-x-opt"},
    Entry{EstimatorId::RegXZOpt, "reg-xz-opt"},
    Entry{EstimatorId::G1Opt, "g1-opt"},
    Entry{EstimatorId::G2Opt, "g2-opt"},
    Entry{EstimatorId::G3Opt, "g3-opt"},
    Entry{EstimatorId::G4Opt, "g4-opt"},
    Entry{EstimatorId::G5Opt, "g5-opt"},
    Entry{EstimatorId::G6Opt, "g6-opt"},
    Entry{EstimatorId::G7Opt, "g7-opt"},
    Entry{EstimatorId::FLinearOpt, "f-linear-opt"},
};

std::optional<GFormKind> gform_of(EstimatorId id) {
    const int g = static_cast<int>(id) - static_cast<int>(EstimatorId::G1);
    if (g >= 0 && g < 7) return static_cast<GFormKind>(g + 1);
    const int go = static_cast<int>(id) - static_cast<int>(EstimatorId::G1Opt);
    if (go >= 0 && go < 7) return static_cast<GFormKind>(go + 1);
    return std::nullopt;
}

}  // namespace

std::string_view to_string(EstimatorId id) {
    for (const auto& e : kCatalog) {
        if (e.id == id) return e.name;
    }
    return "unknown";
}

std::optional<EstimatorId> parse_estimator(std::string_view name) {
    for (const auto& e : kCatalog) {
        if (e.name == name) return e.id;
    }
    return std::nullopt;
}

const std::vector<EstimatorId>& all_estimators() {
    static const std::vector<EstimatorId> ids = [] {
        std::vector<EstimatorId> v;
        for (const auto& e : kCatalog) v.push_back(e.id);
        return v;
    }();
    return ids;
}

const std::vector<EstimatorId>& sample_estimators() {
    static const std::vector<EstimatorId> ids = [] {
        std::vector<EstimatorId> v;
        for (const auto& e : kCatalog) {
            if (!needs_true_coefficients(e.id)) v.push_back(e.id);
        }
        return v;
    }();
    return ids;
}

bool needs_true_coefficients(EstimatorId id) { return static_cast<int>(id) >= static_cast<int>(EstimatorId::RegXOpt); }

bool is_class_gGF(EstimatorId id) {
    if (gform_of(id)) return true;
    switch (id) {
    case EstimatorId::RegXZ:
    case EstimatorId::RegXZOpt:
    case EstimatorId::FLinear:
    case EstimatorId::FLinearOpt:
        return true;
    default:
        return false;
    }
}

EstimatorContext::EstimatorContext(const SampleView& view, const Coefficients* true_coeffs)
    : view_(view), true_coeffs_(true_coeffs) {}

const Coefficients* EstimatorContext::plugin(std::string* error) {
    if (!plugin_tried_) {
        plugin_tried_ = true;
        try {
            plugin_ = plugin_coefficients(view_);
        } catch (const std::exception& e) {
            plugin_error_ = e.what();
        }
    }
    if (!plugin_ && error) *error = plugin_error_;
    return plugin_ ? &*plugin_ : nullptr;
}

EstimateOutcome EstimatorContext::evaluate(EstimatorId id) {
    EstimateOutcome out;
    try {
        const Coefficients* coeffs = nullptr;
        if (needs_true_coefficients(id)) {
            if (!true_coeffs_) throw InvalidInput("population coefficients unavailable");
            coeffs = true_coeffs_;
        } else if (id >= EstimatorId::RegX) {
            std::string err;
            coeffs = plugin(&err);
            if (!coeffs) throw DegenerateModel("plug-in coefficients: " + err);
        }

        if (auto kind = gform_of(id)) {
            out.value = class_g_estimate(view_, optimal_gform(*kind, coeffs->alpha1, coeffs->alpha2));
        } else switch (id) {
        case EstimatorId::Median:
            out.value = view_.medians().y;
            break;
        case EstimatorId::RatioKnown:
            out.value = ratio_known(view_);
            break;
        case EstimatorId::Position: {
            const auto r = position_estimator(view_);
            out.value = r.estimate;
            out.clamped = r.clamped;
            break;
        }
        case EstimatorId::Stratified:
            try {
                out.value = stratification_estimator(view_);
            } catch (const DegenerateModel&) {
                out.value = view_.medians().y;
                out.fallback = true;
            }
            break;
        case EstimatorId::RatioDouble:
            out.value = ratio_double(view_);
            break;
        case EstimatorId::RegX:
        case EstimatorId::RegXOpt:
            out.value = regression_single_aux(view_, *coeffs);
            break;
        case EstimatorId::RegXZ:
        case EstimatorId::RegXZOpt:
            out.value = regression_two_aux(view_, *coeffs);
            break;
        case EstimatorId::FLinear:
        case EstimatorId::FLinearOpt:
            out.value = class_F_estimate(view_, *coeffs);
            break;
        default:
            throw std::logic_error("unhandled estimator");
        }
        if (out.value && !std::isfinite(*out.value)) throw DegenerateModel("non-finite estimate");
    } catch (const InvalidInput& e) {
        out.value.reset();
        out.error = e.what();
    } catch (const DegenerateModel& e) {
        out.value.reset();
        out.error = e.what();
    }
    return out;
}

}  // namespace dsmedian
