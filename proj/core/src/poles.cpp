#include "tbrk/poles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tbrk {

PoleStrategyKind pole_strategy_from_name(const std::string& name) {
    if (name == "poly") return PoleStrategyKind::poly;
    if (name == "ext") return PoleStrategyKind::ext;
    if (name == "det") return PoleStrategyKind::det;
    if (name == "det2") return PoleStrategyKind::det2;
    throw Error("unknown pole strategy: " + name);
}

std::string pole_strategy_name(PoleStrategyKind kind) {
    switch (kind) {
        case PoleStrategyKind::poly: return "poly";
        case PoleStrategyKind::ext: return "ext";
        case PoleStrategyKind::det: return "det";
        case PoleStrategyKind::det2: return "det2";
    }
    return "?";
}

FovSurrogate::FovSurrogate(int num_modes) {
    if (num_modes < 1) throw DimensionMismatch("FovSurrogate: need at least one mode");
    clouds_.resize(static_cast<size_t>(num_modes));
    hulls_.resize(static_cast<size_t>(num_modes));
}

void FovSurrogate::update(int mode, const Matrix& a_proj) {
    auto eig = eig_dense(Matrix(-a_proj));
    update_eigenvalues(mode, eig.values);
}

void FovSurrogate::update_eigenvalues(int mode, const Vector& minus_eigs) {
    if (mode < 0 || mode >= num_modes()) {
        throw DimensionMismatch("FovSurrogate::update: mode out of range");
    }
    auto& cloud = clouds_[static_cast<size_t>(mode)];
    for (Index i = 0; i < minus_eigs.size(); ++i) cloud.push_back(minus_eigs(i));
    hulls_[static_cast<size_t>(mode)] = convex_hull(cloud);
}

const ComplexPolygon& FovSurrogate::hull(int mode) const {
    if (empty(mode)) throw EmptySurrogate("FovSurrogate: empty cloud for requested mode");
    return hulls_.at(static_cast<size_t>(mode));
}

std::vector<Complex> boundary_samples(const FovSurrogate& s, int target_mode, int count) {
    if (count < 1) throw DimensionMismatch("boundary_samples: count must be positive");
    std::vector<ComplexPolygon> others;
    for (int j = 0; j < s.num_modes(); ++j) {
        if (j == target_mode) continue;
        if (s.empty(j)) {
            throw EmptySurrogate("boundary_samples: a required mode cloud is empty");
        }
        others.push_back(s.hull(j));
    }
    if (others.empty()) {
        throw EmptySurrogate("boundary_samples: no other modes to sum");
    }
    const ComplexPolygon sum = minkowski_sum(others);
    std::vector<Complex> samples;
    samples.reserve(static_cast<size_t>(count));

    if (sum.is_point()) {
        samples.assign(static_cast<size_t>(count), sum.vertices[0]);
        return samples;
    }
    if (sum.is_segment()) {
        const Complex a = sum.vertices[0], b = sum.vertices[1];
        if (count == 1) return {a};
        for (int i = 0; i < count; ++i) {
            samples.push_back(a + (b - a) * (static_cast<double>(i) / (count - 1)));
        }
        return samples;
    }

    const double perimeter = sum.perimeter();
    const size_t m = sum.vertices.size();
    size_t edge = 0;
    double edge_start = 0.0;
    double edge_len = std::abs(sum.vertices[1] - sum.vertices[0]);
    for (int i = 0; i < count; ++i) {
        const double t = perimeter * static_cast<double>(i) / count;
        while (t > edge_start + edge_len && edge + 1 < m) {
            edge_start += edge_len;
            ++edge;
            edge_len = std::abs(sum.vertices[(edge + 1) % m] - sum.vertices[edge]);
        }
        const Complex a = sum.vertices[edge];
        const Complex b = sum.vertices[(edge + 1) % m];
        const double frac = edge_len > 0.0 ? (t - edge_start) / edge_len : 0.0;
        samples.push_back(a + (b - a) * frac);
    }
    return samples;
}

namespace {

double length_scale(const std::vector<Complex>& samples, const Vector& ritz) {
    double s = 0.0;
    for (const Complex& z : samples) s = std::max(s, std::abs(z));
    for (Index i = 0; i < ritz.size(); ++i) s = std::max(s, std::abs(ritz(i)));
    return s > 0.0 ? s : 1.0;
}

Complex centroid(const std::vector<Complex>& samples) {
    Complex c = 0.0;
    for (const Complex& z : samples) c += z;
    return c / static_cast<double>(samples.size());
}

/// Conjugate of the winning sample, nudged off the target mode's Ritz set
/// when it lands within 1e-12 of it.
Pole guarded_pole(Complex winner, const std::vector<Complex>& samples, const Vector& ritz,
                  double scale) {
    Complex pole = std::conj(winner);
    double min_dist = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ritz.size(); ++i) {
        min_dist = std::min(min_dist, std::abs(pole - ritz(i)));
    }
    if (min_dist < 1e-12 * scale) {
        Complex dir = winner - centroid(samples);
        const double len = std::abs(dir);
        dir = len > 0.0 ? dir / len : Complex(1.0, 0.0);
        pole = std::conj(winner + 1e-8 * scale * dir);
    }
    return Pole::finite(pole);
}

std::vector<Complex> finite_pole_values(const std::vector<Pole>& poles) {
    std::vector<Complex> out;
    for (const Pole& p : poles) {
        if (!p.infinite) out.push_back(p.value);
    }
    return out;
}

}  // namespace

Pole next_pole_det(const FovSurrogate& s, int mode, const std::vector<Pole>& current_poles,
                   const Vector& ritz, Index block_size, int sample_count) {
    if (ritz.size() == 0) {
        throw PreconditionViolation("next_pole_det: empty Ritz set");
    }
    const auto samples = boundary_samples(s, mode, sample_count);
    const auto xi = finite_pole_values(current_poles);
    const double scale = length_scale(samples, ritz);

    bool have = false;
    Complex winner = samples.front();
    double best = -std::numeric_limits<double>::infinity();
    for (const Complex& lam : samples) {
        bool collide = false;
        double obj = 0.0;
        for (Index i = 0; i < ritz.size(); ++i) {
            const double dist = std::abs(lam - std::conj(ritz(i)));
            if (dist < 1e-14 * scale) {
                collide = true;
                break;
            }
            obj -= std::log(dist);
        }
        if (collide) continue;
        for (const Complex& p : xi) {
            obj += static_cast<double>(block_size) * std::log(std::abs(lam - std::conj(p)));
        }
        if (!have || obj > best) {
            have = true;
            best = obj;
            winner = lam;
        }
    }
    return guarded_pole(winner, samples, ritz, scale);
}

Pole next_pole_det2(const FovSurrogate& s, int mode, const std::vector<Pole>& current_poles,
                    const Vector& ritz, Index block_size, Index k, int sample_count) {
    if (ritz.size() == 0) {
        throw PreconditionViolation("next_pole_det2: empty Ritz set");
    }
    if (k >= 1 && ritz.size() < (k - 1) * block_size + 1) {
        throw PreconditionViolation("next_pole_det2: not enough Ritz values for iteration count");
    }
    const auto samples = boundary_samples(s, mode, sample_count);
    const auto xi = finite_pole_values(current_poles);
    const double scale = length_scale(samples, ritz);

    std::vector<double> dist(static_cast<size_t>(ritz.size()));
    bool have = false;
    Complex winner = samples.front();
    double best = -std::numeric_limits<double>::infinity();
    for (const Complex& lam : samples) {
        for (Index i = 0; i < ritz.size(); ++i) {
            dist[static_cast<size_t>(i)] = std::abs(std::conj(lam) - ritz(i));
        }
        std::sort(dist.begin(), dist.end());
        bool collide = false;
        double obj = 0.0;
        for (Index j = 1; j <= k - 1; ++j) {
            const double dj = dist[static_cast<size_t>((j - 1) * block_size)];
            if (dj < 1e-14 * scale) {
                collide = true;
                break;
            }
            obj -= std::log(dj);
        }
        if (collide) continue;
        for (const Complex& p : xi) {
            obj += std::log(std::abs(lam - std::conj(p)));
        }
        if (!have || obj > best) {
            have = true;
            best = obj;
            winner = lam;
        }
    }
    return guarded_pole(winner, samples, ritz, scale);
}

Pole next_pole_static(PoleStrategyKind kind, Index j) {
    if (kind == PoleStrategyKind::poly) return Pole::inf();
    if (kind == PoleStrategyKind::ext) {
        return (j % 2 == 0) ? Pole::inf() : Pole::finite(Complex(0.0));
    }
    throw PreconditionViolation("next_pole_static: strategy is not static");
}

}  // namespace tbrk
