#pragma once

#include <cmath>
#include <complex>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "errors.hpp"

namespace extliou {

struct SpectralDensity {
    enum class Kind { lorentzian, bandgap };

    Kind kind = Kind::lorentzian;
    double gamma = 1.0;   // coupling strength
    double lambda = 1.0;  // width
    double omega0 = 0.0;  // center
    double q = 0.0;       // relative gap width, bandgap only

    static SpectralDensity lorentzian(double gamma, double lambda, double omega0 = 0.0)
    {
        SpectralDensity J{Kind::lorentzian, gamma, lambda, omega0, 0.0};
        J.validate();
        return J;
    }

    /// q = 0 gives the plain Lorentzian; q = 1 is rejected (J vanishes identically).
    static SpectralDensity bandgap(double gamma, double lambda, double omega0, double q)
    {
        if (q == 1.0)
            throw DegenerateEnvironmentError("bandgap: q = 1 gives J identically zero");
        if (q == 0.0)
            return lorentzian(gamma, lambda, omega0);
        SpectralDensity J{Kind::bandgap, gamma, lambda, omega0, q};
        J.validate();
        return J;
    }

    void validate() const
    {
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ParameterError("spectral density: coupling strength must be > 0");
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw ParameterError("spectral density: width must be > 0");
        if (!std::isfinite(omega0))
            throw ParameterError("spectral density: center must be finite");
        if (kind == Kind::bandgap) {
            if (q == 1.0)
                throw DegenerateEnvironmentError("bandgap: q = 1 gives J identically zero");
            if (!(q > 0.0 && q < 1.0))
                throw ParameterError("bandgap: q must lie in (0, 1)");
        }
    }

    double operator()(double omega) const { return evaluate(omega); }

    double evaluate(double omega) const
    {
        validate();
        const double x = omega - omega0;
        const double L2 = lambda * lambda;
        if (kind == Kind::bandgap) {
            // difference of the two Lorentzians combined over a common denominator
            const double g2 = q * q * L2;
            return 0.5 * gamma * L2 * x * x * (1.0 - q * q) / ((x * x + L2) * (x * x + g2));
        }
        return 0.5 * gamma * L2 / (x * x + L2);
    }
};

inline double evaluate_spectral_density(const SpectralDensity& J, double omega)
{
    return J.evaluate(omega);
}

/// One term w * exp(-i Omega t - gamma |t| / 2).
struct ExponentTerm {
    std::complex<double> weight;
    double frequency = 0.0;
    double decay = 0.0;
};

struct CorrelationSpec {
    std::vector<ExponentTerm> terms;
    bool rwa = true;
    double temperature = 0.0;

    void validate() const
    {
        if (terms.empty())
            throw ParameterError("correlation spec: empty term list");
        if (temperature != 0.0)
            throw UnsupportedError("correlation spec: only zero temperature is supported");
        for (const auto& t : terms) {
            if (!(t.decay > 0.0))
                throw ParameterError("correlation spec: every decay rate must be > 0");
            if (!std::isfinite(t.weight.real()) || !std::isfinite(t.weight.imag()) ||
                !std::isfinite(t.frequency))
                throw ParameterError("correlation spec: non-finite term");
        }
    }
};

inline CorrelationSpec exponents_for(const SpectralDensity& J)
{
    J.validate();
    CorrelationSpec s;
    const double w = 0.5 * J.gamma * J.lambda;
    s.terms.push_back({w, 0.0, 2.0 * J.lambda});
    if (J.kind == SpectralDensity::Kind::bandgap)
        s.terms.push_back({-J.q * w, 0.0, 2.0 * J.q * J.lambda});
    return s;
}

/// sum_i w_i exp(-i Omega_i t - gamma_i |t| / 2).
inline std::complex<double> correlation_value(const CorrelationSpec& spec, double t)
{
    std::complex<double> c = 0.0;
    const double at = std::abs(t);
    for (const auto& term : spec.terms)
        c += term.weight * std::exp(std::complex<double>(-0.5 * term.decay * at, -term.frequency * t));
    return c;
}

struct QuadratureOptions {
    double abs_tol = 1e-8;
    double rel_tol = 1e-10;
    double window = 200.0;   // core interval is omega0 +- window * lambda
    std::size_t workspace = 4000;
};

namespace detail {

struct GslWorkspace {
    explicit GslWorkspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)), n(n) {}
    ~GslWorkspace() { gsl_integration_workspace_free(w); }
    GslWorkspace(const GslWorkspace&) = delete;
    GslWorkspace& operator=(const GslWorkspace&) = delete;
    gsl_integration_workspace* w;
    std::size_t n;
};

template <class F>
gsl_function make_function(const F& f)
{
    gsl_function g;
    g.function = [](double x, void* p) { return (*static_cast<const F*>(p))(x); };
    g.params = const_cast<F*>(&f);
    return g;
}

inline void check_status(int status, double err, const char* where)
{
    if (status != GSL_SUCCESS)
        throw AccuracyError(std::string("correlation_quadrature: ") + where + " did not converge (" +
                                gsl_strerror(status) + "), estimated error " + std::to_string(err),
                            err);
}

} // namespace detail

/// (1/pi) int J(w) exp(-i w t) dw in the frame rotating at omega0, i.e.
/// (1/pi) int J(omega0 + x) exp(-i x t) dx over x > -omega0, or over the whole line
/// when `extend_negative`. The core window is integrated adaptively; tails use a
/// Fourier quadrature (t > 0) or an infinite-range rule (t = 0).
inline std::complex<double> correlation_quadrature(const SpectralDensity& J, double t,
                                                   bool extend_negative,
                                                   const QuadratureOptions& opt = {})
{
    J.validate();
    if (t < 0.0)
        throw ParameterError("correlation_quadrature: t must be >= 0");
    gsl_set_error_handler_off();
    const double W = opt.window * J.lambda;
    const double lo = extend_negative ? -W : std::max(-W, -J.omega0);
    detail::GslWorkspace ws(opt.workspace), cyc(opt.workspace);

    auto fcos = [&](double x) { return J.evaluate(J.omega0 + x) * std::cos(x * t); };
    auto fsin = [&](double x) { return J.evaluate(J.omega0 + x) * std::sin(x * t); };
    double re = 0, im = 0, err = 0;
    {
        auto g = detail::make_function(fcos);
        int st = gsl_integration_qag(&g, lo, W, opt.abs_tol, opt.rel_tol, ws.n, GSL_INTEG_GAUSS61,
                                     ws.w, &re, &err);
        detail::check_status(st, err, "core cosine part");
        auto h = detail::make_function(fsin);
        double s = 0;
        st = gsl_integration_qag(&h, lo, W, opt.abs_tol, opt.rel_tol, ws.n, GSL_INTEG_GAUSS61,
                                 ws.w, &s, &err);
        detail::check_status(st, err, "core sine part");
        im = -s;
    }

    // tail integral  int_0^inf g(y) exp(-+ i (W + y) t) dy  for g(y) = J(omega0 +- (W + y))
    auto tail = [&](double sign) -> std::complex<double> {
        auto g = [&](double y) { return J.evaluate(J.omega0 + sign * (W + y)); };
        if (t == 0.0) {
            auto gf = detail::make_function(g);
            double r = 0, e = 0;
            int st = gsl_integration_qagiu(&gf, 0.0, opt.abs_tol, opt.rel_tol, ws.n, ws.w, &r, &e);
            detail::check_status(st, e, "tail");
            return r;
        }
        gsl_integration_qawo_table* tab =
            gsl_integration_qawo_table_alloc(t, 1.0, GSL_INTEG_COSINE, 50);
        auto gf = detail::make_function(g);
        double c = 0, s = 0, e = 0;
        int st = gsl_integration_qawf(&gf, 0.0, opt.abs_tol, ws.n, ws.w, cyc.w, tab, &c, &e);
        if (st == GSL_SUCCESS) {
            gsl_integration_qawo_table_set(tab, t, 1.0, GSL_INTEG_SINE);
            st = gsl_integration_qawf(&gf, 0.0, opt.abs_tol, ws.n, ws.w, cyc.w, tab, &s, &e);
        }
        gsl_integration_qawo_table_free(tab);
        detail::check_status(st, e, "tail");
        // exp(-i sign (W + y) t) = exp(-i sign W t) (cos(yt) - i sign sin(yt))
        return std::exp(std::complex<double>(0.0, -sign * W * t)) *
               std::complex<double>(c, -sign * s);
    };

    std::complex<double> total(re, im);
    total += tail(+1.0);
    if (extend_negative) {
        total += tail(-1.0);
    } else if (-J.omega0 < -W) {
        auto fc = [&](double x) { return J.evaluate(J.omega0 + x) * std::cos(x * t); };
        auto fs = [&](double x) { return J.evaluate(J.omega0 + x) * std::sin(x * t); };
        auto gc = detail::make_function(fc);
        auto gs = detail::make_function(fs);
        double c = 0, s = 0, e = 0;
        int st = gsl_integration_qag(&gc, -J.omega0, -W, opt.abs_tol, opt.rel_tol, ws.n,
                                     GSL_INTEG_GAUSS61, ws.w, &c, &e);
        detail::check_status(st, e, "lower segment");
        st = gsl_integration_qag(&gs, -J.omega0, -W, opt.abs_tol, opt.rel_tol, ws.n,
                                 GSL_INTEG_GAUSS61, ws.w, &s, &e);
        detail::check_status(st, e, "lower segment");
        total += std::complex<double>(c, -s);
    }
    return total / M_PI;
}

// Text record: first line the term count, then one "re(w) im(w) Omega gamma" line per term.
inline void write_correlation_spec(std::ostream& os, const CorrelationSpec& s)
{
    os.precision(17);
    os << s.terms.size() << '\n';
    for (const auto& t : s.terms)
        os << t.weight.real() << ' ' << t.weight.imag() << ' ' << t.frequency << ' ' << t.decay
           << '\n';
}

inline CorrelationSpec read_correlation_spec(std::istream& is)
{
    std::size_t n = 0;
    if (!(is >> n))
        throw IoError("read_correlation_spec: missing term count");
    CorrelationSpec s;
    for (std::size_t k = 0; k < n; ++k) {
        double re, im, om, g;
        if (!(is >> re >> im >> om >> g))
            throw IoError("read_correlation_spec: truncated record");
        s.terms.push_back({{re, im}, om, g});
    }
    s.validate();
    return s;
}

} // namespace extliou
