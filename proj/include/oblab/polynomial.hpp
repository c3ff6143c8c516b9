#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oblab/error.hpp"
#include "oblab/grid.hpp"

namespace oblab {

using Exponents = std::array<int, 3>;

/// Sparse real polynomial in up to three variables.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    const std::map<Exponents, double>& terms() const { return terms_; }

    Polynomial& add(const Exponents& e, double c) {
        if (c == 0.0) return *this;
        auto& slot = terms_[e];
        slot += c;
        if (slot == 0.0) terms_.erase(e);
        return *this;
    }

    double operator()(const Point& x) const {
        double s = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = c;
            for (int d = 0; d < dim_; ++d) m *= ipow(x[d], e[d]);
            s += m;
        }
        return s;
    }

    Point gradient(const Point& x) const {
        Point g{0.0, 0.0, 0.0};
        for (const auto& [e, c] : terms_) {
            for (int a = 0; a < dim_; ++a) {
                if (e[a] == 0) continue;
                double m = c * e[a];
                for (int d = 0; d < dim_; ++d) m *= ipow(x[d], d == a ? e[d] - 1 : e[d]);
                g[a] += m;
            }
        }
        return g;
    }

    Polynomial laplacian() const {
        Polynomial out(dim_);
        for (const auto& [e, c] : terms_) {
            for (int a = 0; a < dim_; ++a) {
                if (e[a] < 2) continue;
                Exponents f = e;
                f[a] -= 2;
                out.add(f, c * e[a] * (e[a] - 1));
            }
        }
        return out;
    }

    int degree() const {
        int deg = -1;
        for (const auto& [e, c] : terms_) deg = std::max(deg, e[0] + e[1] + e[2]);
        return deg;
    }

    bool is_homogeneous() const {
        const int deg = degree();
        return std::all_of(terms_.begin(), terms_.end(),
                           [&](const auto& t) { return t.first[0] + t.first[1] + t.first[2] == deg; });
    }

    double max_abs_coefficient() const {
        double m = 0.0;
        for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    Polynomial operator*(double s) const {
        Polynomial out(dim_);
        for (const auto& [e, c] : terms_) out.add(e, c * s);
        return out;
    }

    Polynomial operator+(const Polynomial& o) const {
        Polynomial out = *this;
        for (const auto& [e, c] : o.terms_) out.add(e, c);
        return out;
    }

    std::string to_string() const {
        std::ostringstream os;
        bool first = true;
        for (const auto& [e, c] : terms_) {
            if (!first) os << " + ";
            first = false;
            os << c;
            for (int d = 0; d < dim_; ++d)
                if (e[d] > 0) os << "*x" << (d + 1) << (e[d] > 1 ? "^" + std::to_string(e[d]) : "");
        }
        return first ? "0" : os.str();
    }

private:
    static double ipow(double x, int k) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= x;
        return r;
    }

    int dim_ = 2;
    std::map<Exponents, double> terms_;
};

/// All exponent tuples of total degree `degree` in `dim` variables.
inline std::vector<Exponents> monomials(int dim, int degree) {
    std::vector<Exponents> out;
    if (dim == 2) {
        for (int a = degree; a >= 0; --a) out.push_back({a, degree - a, 0});
    } else {
        for (int a = degree; a >= 0; --a)
            for (int b = degree - a; b >= 0; --b) out.push_back({a, b, degree - a - b});
    }
    return out;
}

/// Basis of homogeneous harmonic polynomials of the given degree, obtained
/// as the kernel of the Laplacian on the monomial space and orthonormalized
/// in the coefficient inner product.
inline std::vector<Polynomial> harmonic_basis(int dim, int degree) {
    const auto src = monomials(dim, degree);
    if (degree < 2) {
        std::vector<Polynomial> out;
        for (const auto& e : src) out.push_back(Polynomial(dim).add(e, 1.0));
        return out;
    }
    const auto dst = monomials(dim, degree - 2);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()), static_cast<int>(src.size()));
    for (std::size_t j = 0; j < src.size(); ++j) {
        const auto image = Polynomial(dim).add(src[j], 1.0).laplacian();
        for (const auto& [e, c] : image.terms()) {
            const auto it = std::find(dst.begin(), dst.end(), e);
            lap(static_cast<int>(it - dst.begin()), static_cast<int>(j)) = c;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lap, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const int rank = static_cast<int>((sv.array() > 1e-10 * std::max(1.0, sv.maxCoeff())).count());
    std::vector<Polynomial> out;
    for (int k = rank; k < static_cast<int>(src.size()); ++k) {
        Polynomial p(dim);
        for (std::size_t j = 0; j < src.size(); ++j) {
            const double c = svd.matrixV()(static_cast<int>(j), k);
            if (std::abs(c) > 1e-14) p.add(src[j], c);
        }
        out.push_back(p);
    }
    return out;
}

/// Homogeneous quadratic p(x) = 1/2 <A x, x> with symmetric A.
struct QuadraticForm {
    Eigen::MatrixXd A;

    QuadraticForm() : A(Eigen::MatrixXd::Zero(2, 2)) {}
    explicit QuadraticForm(Eigen::MatrixXd a) : A(std::move(a)) {}

    static QuadraticForm diagonal(std::initializer_list<double> diag) {
        const int n = static_cast<int>(diag.size());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        int i = 0;
        for (double d : diag) {
            a(i, i) = d;
            ++i;
        }
        return QuadraticForm(a);
    }

    int dim() const { return static_cast<int>(A.rows()); }

    double operator()(const Point& x) const {
        double s = 0.0;
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < dim(); ++j) s += A(i, j) * x[i] * x[j];
        return 0.5 * s;
    }

    Point gradient(const Point& x) const {
        Point g{0.0, 0.0, 0.0};
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < dim(); ++j) g[i] += A(i, j) * x[j];
        return g;
    }

    /// Laplacian of p, i.e. trace A.
    double laplacian() const { return A.trace(); }

    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
        return es.eigenvalues();
    }

    /// Membership in P+: trace one and nonnegative spectrum, within tol.
    bool in_p_plus(double tol = 1e-9) const {
        return std::abs(A.trace() - 1.0) <= tol && eigenvalues().minCoeff() >= -tol;
    }

    Polynomial to_polynomial() const {
        Polynomial p(dim());
        for (int i = 0; i < dim(); ++i) {
            Exponents e{0, 0, 0};
            e[i] = 2;
            p.add(e, 0.5 * A(i, i));
            for (int j = i + 1; j < dim(); ++j) {
                Exponents f{0, 0, 0};
                f[i] = 1;
                f[j] = 1;
                p.add(f, A(i, j));
            }
        }
        return p;
    }
};

/// Haar-distributed rotation (QR of a Gaussian matrix with the sign fix),
/// with determinant +1.
inline Eigen::MatrixXd haar_rotation(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (R(i, i) < 0.0) Q.col(i) *= -1.0;
    if (Q.determinant() < 0.0) Q.col(0) *= -1.0;
    return Q;
}

/// R^T-pullback: x -> p(R^T x) has matrix R A R^T.
inline QuadraticForm rotated(const QuadraticForm& p, const Eigen::MatrixXd& R) {
    return QuadraticForm(R * p.A * R.transpose());
}

}  // namespace oblab
