#include "wqed/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>

namespace wqed::num {

namespace {

// 15-point Kronrod nodes/weights with embedded 7-point Gauss (QUADPACK dqk15).
constexpr double kXgk[8] = {
    0.9914553711208126392068546975263285, 0.9491079123427585245261896840478513,
    0.8648644233597690727897127886409262, 0.7415311855993944398638647732807884,
    0.5860872354676911302941448382587296, 0.4058451513773971669066064120769615,
    0.2077849550078984676006894037732449, 0.0};
constexpr double kWgk[8] = {
    0.0229353220105292249637320080589695, 0.0630920926299785532907006631892042,
    0.1047900103222501838398763225415180, 0.1406532597155259187451895905102379,
    0.1690047266392679028265834265985503, 0.1903505780647854099132564024210137,
    0.2044329400752988924141619992346491, 0.2094821410847278280129991748917143};
constexpr double kWg[4] = {
    0.1294849661688696932706114326790820, 0.2797053914892766679014677714237796,
    0.3818300505051189449503697754889751, 0.4179591836734693877551020408163265};

struct Panel {
    double a, b;
    cplx value;
    double err;
    bool operator<(const Panel& o) const { return err < o.err; }  // max-heap
};

Panel eval_panel(const std::function<cplx(double)>& f, double a, double b, long& evals) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    cplx kron = kWgk[7] * f(c);
    cplx gauss = kWg[3] * f(c);
    evals += 1;
    for (int j = 0; j < 7; ++j) {
        const cplx lo = f(c - h * kXgk[j]);
        const cplx hi = f(c + h * kXgk[j]);
        evals += 2;
        kron += kWgk[j] * (lo + hi);
        if (j % 2 == 1) gauss += kWg[j / 2] * (lo + hi);
    }
    kron *= h;
    gauss *= h;
    return Panel{a, b, kron, std::abs(kron - gauss)};
}

}  // namespace

QuadResult integrate_seeded(const std::function<cplx(double)>& f, double a, double b,
                            std::vector<double> seeds, const QuadOptions& opt) {
    QuadResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }

    // Initial breakpoints: endpoints, interior seeds, uniform pre-split.
    std::vector<double> cuts{a, b};
    for (double s : seeds)
        if (s > a && s < b) cuts.push_back(s);
    if (opt.initial_panels > 1) {
        const double h = (b - a) / opt.initial_panels;
        for (int i = 1; i < opt.initial_panels; ++i) cuts.push_back(a + i * h);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::priority_queue<Panel> heap;
    cplx total{};
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Panel p = eval_panel(f, cuts[i], cuts[i + 1], out.evaluations);
        total += p.value;
        total_err += p.err;
        heap.push(p);
    }

    long panels = static_cast<long>(heap.size());
    auto good_enough = [&] {
        return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    };
    while (!good_enough() && panels < opt.max_panels && !heap.empty()) {
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) continue;  // cannot split further
        Panel left = eval_panel(f, worst.a, mid, out.evaluations);
        Panel right = eval_panel(f, mid, worst.b, out.evaluations);
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        ++panels;
    }

    out.value = sign * total;
    out.error = total_err;
    out.converged = good_enough();
    return out;
}

QuadResult integrate(const std::function<cplx(double)>& f, double a, double b,
                     const QuadOptions& opt) {
    return integrate_seeded(f, a, b, {}, opt);
}

QuadResult principal_value(const std::function<cplx(double)>& f, double a, double b,
                           double x0, const QuadOptions& opt) {
    if (!(a < x0 && x0 < b))
        throw std::invalid_argument("principal_value: x0 must lie strictly inside [a, b]");
    const double h = std::min(x0 - a, b - x0);
    // Symmetric fold: \int_0^h [f(x0+u) - f(x0-u)]/u du  (regular at u = 0).
    auto folded = [&](double u) { return (f(x0 + u) - f(x0 - u)) / u; };
    QuadResult sym = integrate(folded, 0.0, h, opt);
    // Remainder lies entirely on one side, away from the singularity.
    QuadResult rest;
    if (x0 - a < b - x0)
        rest = integrate([&](double x) { return f(x) / (x - x0); }, x0 + h, b, opt);
    else if (b - x0 < x0 - a)
        rest = integrate([&](double x) { return f(x) / (x - x0); }, a, x0 - h, opt);
    else
        rest.converged = true;  // symmetric interval: no remainder

    QuadResult out;
    out.value = sym.value + rest.value;
    out.error = sym.error + rest.error;
    out.evaluations = sym.evaluations + rest.evaluations;
    out.converged = sym.converged && rest.converged;
    return out;
}

// ---- fits ----------------------------------------------------------------

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw numeric_error("linear_fit: degenerate abscissae");
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    const double ss_tot = syy - sy * sy / n;
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

DecayFitResult fit_decay(std::span<const double> d, std::span<const double> m,
                         double floor) {
    if (d.size() != m.size())
        throw std::invalid_argument("fit_decay: size mismatch");
    std::vector<double> dd, logm;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (m[i] > floor && d[i] > 0.0) {
            dd.push_back(d[i]);
            logm.push_back(std::log(m[i]));
        }
    }
    if (dd.size() < 4)
        throw numeric_error("fit_decay: fewer than 4 usable samples above the noise floor");

    std::vector<double> logd(dd.size());
    for (std::size_t i = 0; i < dd.size(); ++i) logd[i] = std::log(dd[i]);

    const LinearFit pw = linear_fit(logd, logm);
    const LinearFit ex = linear_fit(dd, logm);

    DecayFitResult out;
    out.power_exponent = -pw.slope;
    out.power_r2 = pw.r2;
    out.exp_rate = -ex.slope;
    out.exp_r2 = ex.r2;
    out.used_samples = static_cast<int>(dd.size());
    out.best = (ex.r2 > pw.r2) ? DecayModel::Exponential : DecayModel::PowerLaw;
    return out;
}

// ---- matrix pencil ---------------------------------------------------------

std::vector<ExpMode> matrix_pencil(std::span<const double> y, double dx,
                                   int max_modes, double sv_rel_tol) {
    const int n = static_cast<int>(y.size());
    if (max_modes < 1) throw std::invalid_argument("matrix_pencil: max_modes >= 1");
    if (n < 2 * max_modes + 2)
        throw numeric_error("matrix_pencil: too few samples for requested mode count");
    if (dx <= 0.0) throw std::invalid_argument("matrix_pencil: dx must be positive");

    const int p = n / 2;  // pencil parameter
    Eigen::MatrixXd Y(n - p, p + 1);
    for (int i = 0; i < n - p; ++i)
        for (int j = 0; j <= p; ++j) Y(i, j) = y[i + j];

    Eigen::BDCSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > sv_rel_tol * sv(0)) ++rank;
    rank = std::min(rank, max_modes);
    if (rank == 0) return {};

    Eigen::MatrixXd V = svd.matrixV().leftCols(rank);  // (p+1) x rank
    Eigen::MatrixXd V1 = V.topRows(p);                 // drop last row
    Eigen::MatrixXd V2 = V.bottomRows(p);              // drop first row
    // z_i = eigenvalues of pinv(V1) * V2
    Eigen::MatrixXd A =
        (V1.transpose() * V1).ldlt().solve(V1.transpose() * V2);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw numeric_error("matrix_pencil: eigen decomposition failed");

    std::vector<cplx> zs;
    for (int i = 0; i < rank; ++i) {
        const cplx z = es.eigenvalues()(i);
        if (std::abs(z) > 1e-14) zs.push_back(z);
    }
    if (zs.empty()) return {};

    // Amplitudes by least squares against the Vandermonde system.
    Eigen::MatrixXcd Vd(n, zs.size());
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < zs.size(); ++j) Vd(i, j) = std::pow(zs[j], i);
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = y[i];
    Eigen::VectorXcd amp = Vd.colPivHouseholderQr().solve(rhs);

    std::vector<ExpMode> modes;
    for (std::size_t j = 0; j < zs.size(); ++j)
        modes.push_back(ExpMode{std::log(zs[j]) / dx, amp(static_cast<int>(j))});
    std::sort(modes.begin(), modes.end(), [](const ExpMode& a, const ExpMode& b) {
        return std::abs(a.amplitude) > std::abs(b.amplitude);
    });
    return modes;
}

// ---- Bessel ---------------------------------------------------------------

std::vector<double> bessel_j_array(int n, double x) {
    if (n < 0) throw std::invalid_argument("bessel_j_array: n >= 0");
    if (x < 0.0) throw std::invalid_argument("bessel_j_array: x >= 0");
    std::vector<double> j(n + 1, 0.0);
    if (x < 1e-12) {
        j[0] = 1.0;
        return j;
    }
    // Miller's algorithm: downward recurrence from well above max(n, x),
    // normalized with J_0 + 2*sum J_2k = 1.
    const int start = static_cast<int>(std::max<double>(n, x)) + 52 +
                      static_cast<int>(std::sqrt(40.0 * std::max<double>(n, x)));
    double jp = 0.0, jc = 1e-300;
    double norm = 0.0;
    for (int k = start; k >= 1; --k) {
        const double jm = (2.0 * k / x) * jc - jp;
        jp = jc;
        jc = jm;
        if (k - 1 <= n) j[k - 1] = jc;
        if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * jc;
        if (std::abs(jc) > 1e250) {  // rescale to avoid overflow
            jc *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for (double& v : j) v *= 1e-250;
        }
    }
    norm += jc;  // jc now holds the candidate J_0
    for (double& v : j) v /= norm;
    return j;
}

}  // namespace wqed::num
