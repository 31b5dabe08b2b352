#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "sst/numeric.hpp"

namespace sst {

template <class S>
struct Block {
    S width;
    S height;
};

// A descending step function together with the prefix sums of its widths and
// masses. Width is measured in Gibbs-weight units, height in rescaled
// probability density; total width is the partition function of the source
// state, total mass its probability.
//
// Canonical form: zero-width blocks dropped, blocks sorted by height
// (descending, stable), adjacent equal heights merged. Zero-height blocks are
// kept; they always land at the tail.
template <class S>
class StepFunction {
  public:
    StepFunction() = default;

    static StepFunction from_blocks(std::vector<Block<S>> raw) {
        for (const auto& b : raw) {
            if (b.width < S(0) || b.height < S(0))
                throw validation_error("step function blocks need nonnegative width and height");
        }
        std::erase_if(raw, [](const Block<S>& b) { return b.width == S(0); });
        std::stable_sort(raw.begin(), raw.end(),
                         [](const Block<S>& a, const Block<S>& b) { return a.height > b.height; });
        std::vector<Block<S>> merged;
        for (auto& b : raw) {
            if (!merged.empty() && merged.back().height == b.height)
                merged.back().width += b.width;
            else
                merged.push_back(std::move(b));
        }
        StepFunction f;
        f.blocks_ = std::move(merged);
        f.rebuild();
        return f;
    }

    const std::vector<Block<S>>& blocks() const { return blocks_; }
    bool empty() const { return blocks_.empty(); }

    // Total width, equal to the partition function of the source state.
    const S& support() const { return support_; }
    // Width of the positive-height part.
    const S& positive_support() const { return positive_support_; }
    const S& total_mass() const { return mass_; }
    S top_height() const { return blocks_.empty() ? S(0) : blocks_.front().height; }

    // Lorenz integral F(l) = int_0^l f.
    S cumulative(const S& l) const {
        if (l < S(0)) throw precondition_error("cumulative: negative extent");
        if (l >= support_) return mass_;
        size_t i = upper_width_index(l);
        const S base = i == 0 ? S(0) : cum_mass_[i - 1];
        const S x0 = i == 0 ? S(0) : cum_width_[i - 1];
        return base + blocks_[i].height * (l - x0);
    }

    // Generalized inverse sup{x : F(x) <= y}; empty result is the +inf
    // sentinel for a vacuous constraint (y >= total mass).
    std::optional<S> inverse_extent(const S& y) const {
        if (y < S(0)) throw precondition_error("inverse_extent: negative mass");
        if (y >= mass_) return std::nullopt;
        return extent_at_mass(y);
    }

    // Left inverse inf{x : F(x) >= y}. Demands y <= total mass. Coincides
    // with inverse_extent below the total mass; at the total mass it returns
    // the end of the positive support instead of the sentinel.
    S extent_reaching(const S& y) const {
        if (y < S(0)) throw precondition_error("extent_reaching: negative mass");
        if (y > mass_) throw precondition_error("extent_reaching: mass beyond total");
        if (y == S(0)) return S(0);
        if (y == mass_) return positive_support_;
        return extent_at_mass(y);
    }

    // Height at extent x (blocks are half-open (x0, x1]).
    S height_at(const S& x) const {
        if (x <= S(0) || x > support_) return S(0);
        size_t lo = 0, hi = blocks_.size();
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cum_width_[mid] < x) lo = mid + 1; else hi = mid;
        }
        return blocks_[lo].height;
    }

    // Cumulative widths at block boundaries (the breakpoints of F).
    const std::vector<S>& breakpoints() const { return cum_width_; }
    const std::vector<S>& cumulative_masses() const { return cum_mass_; }

    StepFunction scaled_heights(const S& c) const {
        std::vector<Block<S>> b = blocks_;
        for (auto& blk : b) blk.height *= c;
        return from_blocks(std::move(b));
    }

    // Product construction: widths and heights multiply pairwise.
    StepFunction tensor(const StepFunction& g) const {
        std::vector<Block<S>> b;
        b.reserve(blocks_.size() * g.blocks_.size());
        for (const auto& x : blocks_)
            for (const auto& y : g.blocks_)
                b.push_back({x.width * y.width, x.height * y.height});
        return from_blocks(std::move(b));
    }

  private:
    void rebuild() {
        cum_width_.clear();
        cum_mass_.clear();
        support_ = S(0);
        mass_ = S(0);
        positive_support_ = S(0);
        for (const auto& b : blocks_) {
            support_ += b.width;
            mass_ += b.width * b.height;
            if (b.height > S(0)) positive_support_ = support_;
            cum_width_.push_back(support_);
            cum_mass_.push_back(mass_);
        }
    }

    // first block index whose cumulative width exceeds l (l < support)
    size_t upper_width_index(const S& l) const {
        size_t lo = 0, hi = blocks_.size();
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cum_width_[mid] <= l) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

    S extent_at_mass(const S& y) const {
        // first block where the cumulative mass passes y; its height is
        // positive because the mass strictly increases through it
        size_t lo = 0, hi = blocks_.size();
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cum_mass_[mid] < y) lo = mid + 1; else hi = mid;
        }
        if (cum_mass_[lo] == y && blocks_[lo].height == S(0)) {
            // plateau: back up to the last mass-increasing block
            while (lo > 0 && cum_mass_[lo - 1] == y) --lo;
        }
        const S base = lo == 0 ? S(0) : cum_mass_[lo - 1];
        const S x0 = lo == 0 ? S(0) : cum_width_[lo - 1];
        return x0 + (y - base) / blocks_[lo].height;
    }

    std::vector<Block<S>> blocks_;
    std::vector<S> cum_width_;
    std::vector<S> cum_mass_;
    S support_{0};
    S positive_support_{0};
    S mass_{0};
};

template <class S>
StepFunction<S> make_step_function(std::vector<Block<S>> blocks) {
    return StepFunction<S>::from_blocks(std::move(blocks));
}

// Piecewise-linear cumulative (Lorenz) curve of a step function: concave,
// nondecreasing, y(0) = 0.
template <class S>
struct CumulativeCurve {
    std::vector<std::pair<S, S>> points;  // (extent, accumulated mass)
};

template <class S>
CumulativeCurve<S> cumulative_curve(const StepFunction<S>& f) {
    CumulativeCurve<S> c;
    c.points.emplace_back(S(0), S(0));
    const auto& w = f.breakpoints();
    const auto& m = f.cumulative_masses();
    for (size_t i = 0; i < w.size(); ++i) c.points.emplace_back(w[i], m[i]);
    return c;
}

template <class S>
struct MixResult {
    S m;          // the relative mixedness
    S binding_l;  // extent where the constraint binds
    S l_star;     // smallest l with F(l) >= 1 - eps
};

namespace detail {
template <class S>
void require_unit_mass(const StepFunction<S>& f, const char* who) {
    if (!num<S>::eq(f.total_mass(), S(1)))
        throw precondition_error(std::string(who) + ": step function must have total mass 1");
}
}  // namespace detail

// Relative mixedness M(f/(1-eps) || g): the largest m with
// F(l)/(1-eps) >= G(l m) for all l. The objective
// l -> extent_reaching(g, F(l)/(1-eps)) / l is a ratio of affine functions
// between critical points, hence monotone there, so the infimum over
// l in (0, l*] is attained on the critical set below. The constraint at
// l = l* itself is vacuous; the left limit, which is what binds, equals the
// evaluation with the left inverse, so a single formula covers every point.
template <class S>
MixResult<S> relative_mixedness(const StepFunction<S>& f, const StepFunction<S>& g, const S& eps) {
    if (eps < S(0) || eps >= S(1)) throw precondition_error("relative_mixedness: eps outside [0,1)");
    detail::require_unit_mass(f, "relative_mixedness(f)");
    detail::require_unit_mass(g, "relative_mixedness(g)");
    if (!(g.top_height() > S(0)))
        throw precondition_error("relative_mixedness: final state has no finite-energy support");

    const S one_minus = S(1) - eps;
    // clamps absorb float fuzz around unit mass; exact mode is untouched
    auto reach_f = [&](const S& y) { return f.extent_reaching(std::min(y, f.total_mass())); };
    auto reach_g = [&](const S& y) { return g.extent_reaching(std::min(y, g.total_mass())); };
    const S l_star = reach_f(one_minus);

    std::vector<S> criticals;
    criticals.push_back(l_star);
    for (const S& bp : f.breakpoints())
        if (bp > S(0) && bp < l_star) criticals.push_back(bp);
    for (const S& gm : g.cumulative_masses()) {
        if (gm <= S(0)) continue;
        const S target = gm * one_minus;
        if (target < one_minus) {
            const S l = reach_f(target);
            if (l > S(0) && l < l_star) criticals.push_back(l);
        }
    }
    std::sort(criticals.begin(), criticals.end());
    criticals.erase(std::unique(criticals.begin(), criticals.end()), criticals.end());

    std::optional<MixResult<S>> best;
    for (const S& l : criticals) {
        const S y = f.cumulative(l) / one_minus;
        const S candidate = reach_g(y) / l;
        if (!best || candidate < best->m) best = MixResult<S>{candidate, l, l_star};
    }
    return *best;
}

template <class S>
bool majorizes(const StepFunction<S>& f, const StepFunction<S>& g) {
    detail::require_unit_mass(f, "majorizes(f)");
    detail::require_unit_mass(g, "majorizes(g)");
    std::vector<S> ls;
    for (const S& x : f.breakpoints()) ls.push_back(x);
    for (const S& x : g.breakpoints()) ls.push_back(x);
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    for (const S& l : ls)
        if (!num<S>::ge(f.cumulative(std::min(l, f.support())), g.cumulative(std::min(l, g.support()))))
            return false;
    return true;
}

// (1/2) int |f - g| over the union of supports, boundaries aligned.
template <class S>
S trace_distance(const StepFunction<S>& f, const StepFunction<S>& g) {
    if (!num<S>::ge(S(1), f.total_mass()) || !num<S>::ge(S(1), g.total_mass()))
        throw precondition_error("trace_distance: mass beyond 1");
    std::vector<S> xs;
    xs.push_back(S(0));
    for (const S& x : f.breakpoints()) xs.push_back(x);
    for (const S& x : g.breakpoints()) xs.push_back(x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    S total(0);
    for (size_t i = 0; i + 1 < xs.size(); ++i) {
        const S& a = xs[i];
        const S& b = xs[i + 1];
        const S hf = f.height_at(b);
        const S hg = g.height_at(b);
        const S d = hf > hg ? hf - hg : hg - hf;
        total += d * (b - a);
    }
    return total / S(2);
}

}  // namespace sst
