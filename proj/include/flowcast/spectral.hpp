// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <fftw3.h>

#include "flowcast/common.hpp"
#include "flowcast/series.hpp"

namespace flowcast {

using cplx = std::complex<double>;

/// Wavenumber bookkeeping for an n x n doubly periodic grid on (0, 2pi)^2.
/// Integer wavenumbers follow standard FFT ordering: index i maps to
/// k = i for i <= n/2 and k = i - n otherwise, so k ranges over
/// {-n/2+1, ..., n/2}.
struct SpectralGrid {
    int n = 0;
    std::vector<int> kx, ky;       // per-index integer wavenumbers (kx: row, ky: col)
    std::vector<double> ksq;       // |k|^2, n*n, row-major (ix*n + iy)
    std::vector<bool> dealias_mask; // false exactly where max(|kx|,|ky|) > n/3

    std::size_t idx(int ix, int iy) const { return static_cast<std::size_t>(ix) * n + iy; }
};

inline SpectralGrid make_grid(int n) {
    if (n < 8 || n % 2 != 0)
        throw ConfigError(strformat("grid size must be even and >= 8, got %d", n));
    SpectralGrid g;
    g.n = n;
    g.kx.resize(n);
    g.ky.resize(n);
    for (int i = 0; i < n; ++i) {
        int k = (i <= n / 2) ? i : i - n;
        g.kx[i] = k;
        g.ky[i] = k;
    }
    g.ksq.resize(static_cast<std::size_t>(n) * n);
    g.dealias_mask.resize(static_cast<std::size_t>(n) * n);
    const double cutoff = static_cast<double>(n) / 3.0;
    for (int ix = 0; ix < n; ++ix) {
        for (int iy = 0; iy < n; ++iy) {
            double kx = g.kx[ix], ky = g.ky[iy];
            g.ksq[g.idx(ix, iy)] = kx * kx + ky * ky;
            g.dealias_mask[g.idx(ix, iy)] =
                !(std::max(std::abs(kx), std::abs(ky)) > cutoff);
        }
    }
    return g;
}

/// Double-precision complex-to-complex 2D FFT pair with owned buffers.
/// forward() returns true Fourier coefficients (1/n^2 scaling applied);
/// backward() reconstructs the field from such coefficients.
/// Plans use FFTW_ESTIMATE so identical inputs always produce identical
/// outputs across runs.
class Fft2 {
public:
    explicit Fft2(int n) : n_(n), buf_in_(static_cast<std::size_t>(n) * n),
                           buf_out_(static_cast<std::size_t>(n) * n) {
        auto* in = reinterpret_cast<fftw_complex*>(buf_in_.data());
        auto* out = reinterpret_cast<fftw_complex*>(buf_out_.data());
        plan_fwd_ = fftw_plan_dft_2d(n, n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft_2d(n, n, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!plan_fwd_ || !plan_bwd_) throw RuntimeFailure("FFTW plan creation failed");
    }
    ~Fft2() {
        fftw_destroy_plan(plan_fwd_);
        fftw_destroy_plan(plan_bwd_);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    int n() const { return n_; }

    void forward(const std::vector<cplx>& phys, std::vector<cplx>& hat) {
        run(plan_fwd_, phys, hat);
        const double scale = 1.0 / (static_cast<double>(n_) * n_);
        for (auto& v : hat) v *= scale;
    }
    void backward(const std::vector<cplx>& hat, std::vector<cplx>& phys) {
        run(plan_bwd_, hat, phys);
    }

    /// Forward transform of a real field.
    void forward_real(const std::vector<double>& phys, std::vector<cplx>& hat) {
        scratch_.resize(phys.size());
        for (std::size_t i = 0; i < phys.size(); ++i) scratch_[i] = cplx(phys[i], 0.0);
        forward(scratch_, hat);
    }
    /// Inverse transform keeping the real part; returns max |imag| residual.
    double backward_real(const std::vector<cplx>& hat, std::vector<double>& phys) {
        scratch_.resize(hat.size());
        backward(hat, scratch_);
        phys.resize(hat.size());
        double imax = 0.0;
        for (std::size_t i = 0; i < hat.size(); ++i) {
            phys[i] = scratch_[i].real();
            imax = std::max(imax, std::abs(scratch_[i].imag()));
        }
        return imax;
    }

private:
    void run(fftw_plan plan, const std::vector<cplx>& src, std::vector<cplx>& dst) {
        if (static_cast<int>(src.size()) != n_ * n_)
            throw ConfigError("FFT input size does not match grid");
        buf_in_ = src;
        fftw_execute(plan);
        dst = buf_out_;
    }

    int n_;
    std::vector<cplx> buf_in_, buf_out_, scratch_;
    fftw_plan plan_fwd_ = nullptr, plan_bwd_ = nullptr;
};

/// Kolmogorov-flow solver configuration. Time advances the vorticity
/// equation  dw/dt + u . grad w = (1/Re) lap w - k cos(k x2) - drag * w
/// on (0, 2pi)^2 with periodic boundaries.
struct SolverConfig {
    double reynolds = 100.0;
    int forcing_wavenumber = 8;
    double drag_coefficient = 0.1;
    bool forcing_enabled = true;   // test hook: disables the static cosine forcing
    double dt = 1e-3;
    double record_interval = 1e-3;
    int n_sim = 256;
    int n_out = 64;
    double t_end = 1.5;
    std::int64_t seed = 0;
    double ic_peak_wavenumber = 4.0;
    double ic_amplitude = 5.0;
    std::string scenario = "kolmogorov";

    void validate() const {
        if (reynolds <= 0.0) throw ConfigError("reynolds must be positive");
        if (dt <= 0.0) throw ConfigError("dt must be positive");
        if (n_sim < 8 || n_sim % 2 != 0) throw ConfigError("n_sim must be even and >= 8");
        if (n_out < 2 || n_out % 2 != 0) throw ConfigError("n_out must be even and >= 2");
        if (n_sim % n_out != 0) throw ConfigError("n_out must divide n_sim");
        if (t_end < 0.0) throw ConfigError("t_end must be non-negative");
        if (record_interval < dt) throw ConfigError("record_interval must be >= dt");
        double ratio = record_interval / dt;
        if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio)
            throw ConfigError("record_interval must be an integer multiple of dt");
        if (drag_coefficient < 0.0) throw ConfigError("drag_coefficient must be non-negative");
        if (forcing_wavenumber < 0) throw ConfigError("forcing_wavenumber must be non-negative");
        if (ic_peak_wavenumber <= 0.0) throw ConfigError("ic_peak_wavenumber must be positive");
        if (ic_amplitude < 0.0) throw ConfigError("ic_amplitude must be non-negative");
    }

    json to_json() const {
        json j;
        j["reynolds"] = reynolds;
        j["forcing_wavenumber"] = forcing_wavenumber;
        j["drag_coefficient"] = drag_coefficient;
        j["forcing_enabled"] = forcing_enabled;
        j["dt"] = dt;
        j["record_interval"] = record_interval;
        j["n_sim"] = n_sim;
        j["n_out"] = n_out;
        j["t_end"] = t_end;
        j["seed"] = seed;
        j["ic_peak_wavenumber"] = ic_peak_wavenumber;
        j["ic_amplitude"] = ic_amplitude;
        j["scenario"] = scenario;
        return j;
    }
};

/// Spectral vorticity state: true Fourier coefficients of w plus current time.
struct SpectralState {
    std::vector<cplx> omega_hat;
    double time = 0.0;
};

/// Gaussian random field with isotropic spectrum |k| exp(-|k|^2 / (2 kp^2)),
/// zero spatial mean, scaled so max|w0| = ic_amplitude. Conjugate symmetry
/// comes from shaping the spectrum of a real white-noise field.
inline SpectralState init_vorticity(const SpectralGrid& grid, const SolverConfig& cfg, Fft2& fft) {
    cfg.validate();
    const int n = grid.n;
    const std::size_t sz = static_cast<std::size_t>(n) * n;

    std::vector<double> noise(sz);
    Rng rng(static_cast<std::uint64_t>(cfg.seed));
    for (auto& v : noise) v = rng.normal();

    std::vector<cplx> hat;
    fft.forward_real(noise, hat);
    const double kp2 = cfg.ic_peak_wavenumber * cfg.ic_peak_wavenumber;
    for (std::size_t i = 0; i < sz; ++i) {
        double k2 = grid.ksq[i];
        hat[i] *= std::sqrt(k2) * std::exp(-k2 / (2.0 * kp2));
    }
    hat[0] = 0.0;  // zero spatial mean

    std::vector<double> w;
    fft.backward_real(hat, w);
    double maxabs = 0.0;
    for (double v : w) maxabs = std::max(maxabs, std::abs(v));
    double scale = (maxabs > 0.0 && cfg.ic_amplitude > 0.0) ? cfg.ic_amplitude / maxabs : 0.0;
    for (auto& v : hat) v *= scale;

    SpectralState st;
    st.omega_hat = std::move(hat);
    st.time = 0.0;
    return st;
}

/// Streamfunction inversion: psi_hat = omega_hat / |k|^2 (zero mean mode),
/// u = d(psi)/dx2, v = -d(psi)/dx1. Divergence vanishes by construction.
inline void velocity_hat_from_vorticity(const SpectralGrid& grid, const std::vector<cplx>& omega_hat,
                                        std::vector<cplx>& u_hat, std::vector<cplx>& v_hat) {
    const int n = grid.n;
    u_hat.resize(omega_hat.size());
    v_hat.resize(omega_hat.size());
    for (int ix = 0; ix < n; ++ix) {
        for (int iy = 0; iy < n; ++iy) {
            std::size_t i = grid.idx(ix, iy);
            double k2 = grid.ksq[i];
            cplx psi = (k2 > 0.0) ? omega_hat[i] / k2 : cplx(0.0, 0.0);
            u_hat[i] = cplx(0.0, 1.0) * static_cast<double>(grid.ky[iy]) * psi;
            v_hat[i] = -cplx(0.0, 1.0) * static_cast<double>(grid.kx[ix]) * psi;
        }
    }
}

inline void velocity_from_vorticity(const SpectralGrid& grid, const std::vector<cplx>& omega_hat,
                                    Fft2& fft, std::vector<double>& u, std::vector<double>& v) {
    std::vector<cplx> u_hat, v_hat;
    velocity_hat_from_vorticity(grid, omega_hat, u_hat, v_hat);
    fft.backward_real(u_hat, u);
    fft.backward_real(v_hat, v);
}

/// Max spectral divergence magnitude of a velocity pair given in physical space.
inline double max_spectral_divergence(const SpectralGrid& grid, Fft2& fft,
                                      const std::vector<double>& u, const std::vector<double>& v) {
    std::vector<cplx> u_hat, v_hat;
    fft.forward_real(u, u_hat);
    fft.forward_real(v, v_hat);
    const int n = grid.n;
    std::vector<cplx> div_hat(u_hat.size());
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy) {
            std::size_t i = grid.idx(ix, iy);
            div_hat[i] = cplx(0.0, 1.0) * (static_cast<double>(grid.kx[ix]) * u_hat[i] +
                                           static_cast<double>(grid.ky[iy]) * v_hat[i]);
        }
    std::vector<double> div;
    fft.backward_real(div_hat, div);
    double m = 0.0;
    for (double d : div) m = std::max(m, std::abs(d));
    return m;
}

/// One-trajectory time stepper. The stiff linear part (viscosity + drag) is
/// handled exactly through an integrating factor; advection and the static
/// forcing advance with Heun's method. The advection product is dealiased
/// with the two-thirds rule.
class VorticitySolver {
public:
    VorticitySolver(const SpectralGrid& grid, const SolverConfig& cfg)
        : grid_(grid), cfg_(cfg), fft_(grid.n) {
        cfg_.validate();
        if (grid.n != cfg.n_sim)
            throw ConfigError("grid size does not match solver config n_sim");
        const int n = grid_.n;
        const std::size_t sz = static_cast<std::size_t>(n) * n;
        exp_lin_.resize(sz);
        for (std::size_t i = 0; i < sz; ++i) {
            double lin = -(grid_.ksq[i] / cfg_.reynolds + cfg_.drag_coefficient);
            exp_lin_[i] = std::exp(lin * cfg_.dt);
        }
        forcing_hat_.assign(sz, cplx(0.0, 0.0));
        if (cfg_.forcing_enabled && cfg_.forcing_wavenumber > 0) {
            const double k = static_cast<double>(cfg_.forcing_wavenumber);
            std::vector<double> f(sz);
            for (int ix = 0; ix < n; ++ix)
                for (int iy = 0; iy < n; ++iy) {
                    double x2 = 2.0 * M_PI * iy / n;
                    f[grid_.idx(ix, iy)] = -k * std::cos(k * x2);
                }
            fft_.forward_real(f, forcing_hat_);
        }
    }

    Fft2& fft() { return fft_; }

    SpectralState initial_state() { return init_vorticity(grid_, cfg_, fft_); }

    /// Advances one dt. Throws RuntimeFailure on numerical blowup.
    void step(SpectralState& st) {
        const std::size_t sz = st.omega_hat.size();
        nonlinear(st.omega_hat, g1_);
        pred_.resize(sz);
        for (std::size_t i = 0; i < sz; ++i)
            pred_[i] = exp_lin_[i] * (st.omega_hat[i] + cfg_.dt * g1_[i]);
        nonlinear(pred_, g2_);
        for (std::size_t i = 0; i < sz; ++i)
            st.omega_hat[i] = exp_lin_[i] * st.omega_hat[i] +
                              0.5 * cfg_.dt * (exp_lin_[i] * g1_[i] + g2_[i]);
        st.time += cfg_.dt;
        for (std::size_t i = 0; i < sz; ++i) {
            if (!std::isfinite(st.omega_hat[i].real()) || !std::isfinite(st.omega_hat[i].imag()))
                throw RuntimeFailure(strformat("numerical blowup at t=%.6f", st.time));
        }
    }

    /// Physical (u, v, omega) on the simulation grid.
    void fields(const SpectralState& st, std::vector<double>& u, std::vector<double>& v,
                std::vector<double>& w) {
        velocity_from_vorticity(grid_, st.omega_hat, fft_, u, v);
        fft_.backward_real(st.omega_hat, w);
    }

private:
    // g = -dealias(u . grad w) + forcing_hat
    void nonlinear(const std::vector<cplx>& omega_hat, std::vector<cplx>& g) {
        const int n = grid_.n;
        const std::size_t sz = omega_hat.size();
        velocity_hat_from_vorticity(grid_, omega_hat, u_hat_, v_hat_);
        wx_hat_.resize(sz);
        wy_hat_.resize(sz);
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy) {
                std::size_t i = grid_.idx(ix, iy);
                wx_hat_[i] = cplx(0.0, 1.0) * static_cast<double>(grid_.kx[ix]) * omega_hat[i];
                wy_hat_[i] = cplx(0.0, 1.0) * static_cast<double>(grid_.ky[iy]) * omega_hat[i];
            }
        fft_.backward_real(u_hat_, u_);
        fft_.backward_real(v_hat_, v_);
        fft_.backward_real(wx_hat_, wx_);
        fft_.backward_real(wy_hat_, wy_);
        adv_.resize(sz);
        for (std::size_t i = 0; i < sz; ++i) adv_[i] = u_[i] * wx_[i] + v_[i] * wy_[i];
        fft_.forward_real(adv_, g);
        for (std::size_t i = 0; i < sz; ++i) {
            if (!grid_.dealias_mask[i]) g[i] = 0.0;
            else g[i] = -g[i] + forcing_hat_[i];
        }
    }

    const SpectralGrid& grid_;
    SolverConfig cfg_;
    Fft2 fft_;
    std::vector<double> exp_lin_;
    std::vector<cplx> forcing_hat_;
    // step scratch
    std::vector<cplx> g1_, g2_, pred_, u_hat_, v_hat_, wx_hat_, wy_hat_;
    std::vector<double> u_, v_, wx_, wy_, adv_;
};

/// Spectral truncation of omega_hat from an n_sim grid to an n_out grid.
/// Retained band is |k| < n_out/2 in both directions; the coarse Nyquist
/// line is zeroed to keep the truncated field exactly conjugate-symmetric.
inline std::vector<cplx> truncate_spectrum(const SpectralGrid& fine, const std::vector<cplx>& hat,
                                           int n_out) {
    const int nf = fine.n;
    std::vector<cplx> out(static_cast<std::size_t>(n_out) * n_out, cplx(0.0, 0.0));
    for (int kx = -n_out / 2 + 1; kx < n_out / 2; ++kx) {
        for (int ky = -n_out / 2 + 1; ky < n_out / 2; ++ky) {
            int fx = kx >= 0 ? kx : kx + nf;
            int fy = ky >= 0 ? ky : ky + nf;
            int cx = kx >= 0 ? kx : kx + n_out;
            int cy = ky >= 0 ? ky : ky + n_out;
            out[static_cast<std::size_t>(cx) * n_out + cy] =
                hat[static_cast<std::size_t>(fx) * nf + fy];
        }
    }
    return out;
}

/// Runs a full trajectory and records (u, v, omega) snapshots on the n_out
/// grid at every record_interval, starting with the initial state at t = 0.
inline FlowSnapshotSeries simulate(const SolverConfig& cfg) {
    cfg.validate();
    SpectralGrid grid = make_grid(cfg.n_sim);
    VorticitySolver solver(grid, cfg);
    SpectralState st = solver.initial_state();

    SpectralGrid coarse = make_grid(cfg.n_out);
    Fft2 coarse_fft(cfg.n_out);

    const std::int64_t steps_total = std::llround(cfg.t_end / cfg.dt);
    const std::int64_t steps_per_rec = std::llround(cfg.record_interval / cfg.dt);

    FlowSnapshotSeries series;
    series.H = cfg.n_out;
    series.W = cfg.n_out;
    series.C = 3;
    series.variables = {"u", "v", "omega"};
    series.dt_record = cfg.record_interval;
    series.scenario = cfg.scenario;
    series.provenance = cfg.to_json();
    series.seed = cfg.seed;

    std::vector<double> u, v, w;
    auto record = [&]() {
        std::vector<cplx> w_hat_c = truncate_spectrum(grid, st.omega_hat, cfg.n_out);
        velocity_from_vorticity(coarse, w_hat_c, coarse_fft, u, v);
        coarse_fft.backward_real(w_hat_c, w);
        const std::size_t npts = u.size();
        std::size_t base = series.data.size();
        series.data.resize(base + npts * 3);
        for (std::size_t i = 0; i < npts; ++i) {
            series.data[base + i * 3 + 0] = static_cast<float>(u[i]);
            series.data[base + i * 3 + 1] = static_cast<float>(v[i]);
            series.data[base + i * 3 + 2] = static_cast<float>(w[i]);
        }
        ++series.T;
    };

    record();
    for (std::int64_t s = 1; s <= steps_total; ++s) {
        solver.step(st);
        if (s % steps_per_rec == 0) record();
    }
    series.validate();
    return series;
}

} // namespace flowcast
