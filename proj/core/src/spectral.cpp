#include "pfrs/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace pfrs {

namespace {

// Only plan creation and destruction touch FFTW global state.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct R2RPlan {
  double* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::size_t size = 0;

  // dims are in x-fastest order; FFTW wants slowest first.
  void create(const std::vector<int>& dims, const std::vector<fftw_r2r_kind>& fk,
              const std::vector<fftw_r2r_kind>& bk) {
    size = 1;
    for (int d : dims) size *= static_cast<std::size_t>(d);
    std::vector<int> rev(dims.rbegin(), dims.rend());
    std::vector<fftw_r2r_kind> rf(fk.rbegin(), fk.rend());
    std::vector<fftw_r2r_kind> rb(bk.rbegin(), bk.rend());
    std::lock_guard<std::mutex> lock(planner_mutex());
    buf = fftw_alloc_real(size);
    fwd = fftw_plan_r2r(static_cast<int>(rev.size()), rev.data(), buf, buf, rf.data(), FFTW_ESTIMATE);
    bwd = fftw_plan_r2r(static_cast<int>(rev.size()), rev.data(), buf, buf, rb.data(), FFTW_ESTIMATE);
  }

  void destroy() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buf) fftw_free(buf);
    fwd = bwd = nullptr;
    buf = nullptr;
  }
};

std::vector<double> eigenvalues(int n, double h, int count, int shift) {
  std::vector<double> e(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) e[k] = (2.0 - 2.0 * std::cos(kPi * (k + shift) / n)) / (h * h);
  return e;
}

}  // namespace

struct SpectralPoisson::Impl {
  StaggeredGrid grid;
  R2RPlan plan;
  std::array<std::vector<double>, 3> eig;
  double norm = 1.0;
};

SpectralPoisson::SpectralPoisson(const StaggeredGrid& g) : impl_(new Impl) {
  impl_->grid = g;
  const int axes = g.dim();
  std::vector<int> dims;
  for (int a = 0; a < axes; ++a) {
    dims.push_back(g.n(a));
    impl_->eig[a] = eigenvalues(g.n(a), g.h(), g.n(a), 0);
    impl_->norm *= 2.0 * g.n(a);
  }
  if (axes == 2) impl_->eig[2] = {0.0};
  impl_->plan.create(dims, std::vector<fftw_r2r_kind>(axes, FFTW_REDFT10),
                     std::vector<fftw_r2r_kind>(axes, FFTW_REDFT01));
}

SpectralPoisson::~SpectralPoisson() {
  impl_->plan.destroy();
  delete impl_;
}

void SpectralPoisson::solve(const std::vector<double>& rhs, std::vector<double>& out) {
  const auto& g = impl_->grid;
  double* b = impl_->plan.buf;
  std::copy(rhs.begin(), rhs.end(), b);
  fftw_execute(impl_->plan.fwd);
  const auto& e = impl_->eig;
  for (int k = 0; k < g.n(2); ++k) {
    for (int j = 0; j < g.n(1); ++j) {
      for (int i = 0; i < g.n(0); ++i) {
        const std::size_t idx = g.cell_index(i, j, k);
        const double lam = e[0][i] + e[1][j] + e[2][k];
        b[idx] = lam > 0.0 ? -b[idx] / (lam * impl_->norm) : 0.0;
      }
    }
  }
  fftw_execute(impl_->plan.bwd);
  out.assign(b, b + rhs.size());
}

struct SpectralHelmholtz::Impl {
  StaggeredGrid grid;
  std::array<R2RPlan, 3> plan;
  std::array<std::array<std::vector<double>, 3>, 3> eig;
  std::array<std::array<int, 3>, 3> dims{};
  std::array<double, 3> norm{1.0, 1.0, 1.0};
};

SpectralHelmholtz::SpectralHelmholtz(const StaggeredGrid& g) : impl_(new Impl) {
  impl_->grid = g;
  const int axes = g.dim();
  for (int d = 0; d < axes; ++d) {
    std::vector<int> dims;
    std::vector<fftw_r2r_kind> fk, bk;
    for (int a = 0; a < 3; ++a) impl_->dims[d][a] = 1;
    for (int a = 0; a < 3; ++a) impl_->eig[d][a] = {0.0};
    for (int a = 0; a < axes; ++a) {
      const int n = g.n(a);
      if (a == d) {
        dims.push_back(n - 1);
        fk.push_back(FFTW_RODFT00);
        bk.push_back(FFTW_RODFT00);
        impl_->eig[d][a] = eigenvalues(n, g.h(), n - 1, 1);
      } else {
        dims.push_back(n);
        fk.push_back(FFTW_RODFT10);
        bk.push_back(FFTW_RODFT01);
        impl_->eig[d][a] = eigenvalues(n, g.h(), n, 1);
      }
      impl_->dims[d][a] = dims.back();
      impl_->norm[d] *= 2.0 * n;
    }
    bool empty = false;
    for (int v : dims) empty = empty || v <= 0;
    if (!empty) impl_->plan[d].create(dims, fk, bk);
  }
}

SpectralHelmholtz::~SpectralHelmholtz() {
  for (auto& p : impl_->plan) p.destroy();
  delete impl_;
}

void SpectralHelmholtz::solve(double c, const FaceArrays& rhs, FaceArrays& out) {
  const auto& g = impl_->grid;
  for (int d = 0; d < 3; ++d) {
    out[d].assign(g.face_count(d), 0.0);
    if (d >= g.dim() || !impl_->plan[d].buf) continue;
    double* b = impl_->plan[d].buf;
    const auto& m = impl_->dims[d];
    const int oi = d == 0 ? 1 : 0;
    const int oj = d == 1 ? 1 : 0;
    const int ok = d == 2 ? 1 : 0;
    std::size_t q = 0;
    for (int k = 0; k < m[2]; ++k) {
      for (int j = 0; j < m[1]; ++j) {
        for (int i = 0; i < m[0]; ++i) b[q++] = rhs[d][g.face_index(d, i + oi, j + oj, k + ok)];
      }
    }
    fftw_execute(impl_->plan[d].fwd);
    const auto& e = impl_->eig[d];
    q = 0;
    for (int k = 0; k < m[2]; ++k) {
      for (int j = 0; j < m[1]; ++j) {
        for (int i = 0; i < m[0]; ++i) {
          b[q] /= (c + e[0][i] + e[1][j] + e[2][k]) * impl_->norm[d];
          ++q;
        }
      }
    }
    fftw_execute(impl_->plan[d].bwd);
    q = 0;
    for (int k = 0; k < m[2]; ++k) {
      for (int j = 0; j < m[1]; ++j) {
        for (int i = 0; i < m[0]; ++i) out[d][g.face_index(d, i + oi, j + oj, k + ok)] = b[q++];
      }
    }
  }
}

}  // namespace pfrs
