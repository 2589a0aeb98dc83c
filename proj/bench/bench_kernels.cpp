// Times the OpenMP kernels against their serial reference twins and checks
// the outputs stay bit-identical. Sizes roughly bracket what training uses.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
#endif

#include "tailmix/kernels.hpp"
#include "tailmix/rng.hpp"

using namespace tailmix;

namespace {

double wtime() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
#endif
}

Matrix random_matrix(int r, int c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    return worst;
}

struct Case {
    const char* name;
    std::function<void()> parallel;
    std::function<void()> serial;
    std::function<double()> diff;
};

void run_case(const Case& c, int reps) {
    c.parallel(); // warm up and materialize outputs once
    c.serial();

    double t0 = wtime();
    for (int i = 0; i < reps; ++i) c.serial();
    double serial_s = (wtime() - t0) / reps;

    t0 = wtime();
    for (int i = 0; i < reps; ++i) c.parallel();
    double parallel_s = (wtime() - t0) / reps;

    double diff = c.diff();
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   max|diff| %g\n",
                c.name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, diff);
    if (diff != 0.0) {
        std::printf("FAIL: parallel kernel diverged from the reference\n");
        std::exit(1);
    }
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp enabled, max threads %d\n\n", omp_get_max_threads());
#else
    std::printf("built without openmp; comparing identical serial paths\n\n");
#endif
    Rng rng(20240817);

    const int B = 512, IN = 256, OUT = 256, M = 64;
    Matrix X = random_matrix(B, IN, rng);
    Matrix W = random_matrix(OUT, IN, rng);
    std::vector<double> b(OUT);
    for (double& v : b) v = rng.normal();
    Matrix dY = random_matrix(B, OUT, rng);
    Matrix P = random_matrix(M, IN, rng);

    Matrix Yp(B, OUT), Ys(B, OUT);
    Matrix dXp(B, IN), dXs(B, IN);
    Matrix dWp(OUT, IN), dWs(OUT, IN);
    std::vector<double> dbp(OUT, 0.0), dbs(OUT, 0.0);
    Matrix Rp(B, OUT), Rs(B, OUT);
    Matrix Gp(B, OUT), Gs(B, OUT);
    Matrix Dp(B, M), Ds(B, M);

    std::vector<Case> cases;
    cases.push_back({"affine_forward",
                     [&] { kernels::affine_forward(X, W, b, Yp); },
                     [&] { kernels::ref::affine_forward(X, W, b, Ys); },
                     [&] { return max_abs_diff(Yp, Ys); }});
    cases.push_back({"relu_forward",
                     [&] { kernels::relu_forward(Yp, Rp); },
                     [&] { kernels::ref::relu_forward(Yp, Rs); },
                     [&] { return max_abs_diff(Rp, Rs); }});
    cases.push_back({"affine_backward_data",
                     [&] { kernels::affine_backward_data(dY, W, dXp); },
                     [&] { kernels::ref::affine_backward_data(dY, W, dXs); },
                     [&] { return max_abs_diff(dXp, dXs); }});
    cases.push_back({"affine_backward_params",
                     [&] {
                         dWp.fill(0.0);
                         std::fill(dbp.begin(), dbp.end(), 0.0);
                         kernels::affine_backward_params(dY, X, dWp, dbp);
                     },
                     [&] {
                         dWs.fill(0.0);
                         std::fill(dbs.begin(), dbs.end(), 0.0);
                         kernels::ref::affine_backward_params(dY, X, dWs, dbs);
                     },
                     [&] {
                         double worst = max_abs_diff(dWp, dWs);
                         for (int o = 0; o < OUT; ++o)
                             worst = std::max(worst, std::fabs(dbp[o] - dbs[o]));
                         return worst;
                     }});
    cases.push_back({"relu_backward",
                     [&] { kernels::relu_backward(dY, Yp, Gp); },
                     [&] { kernels::ref::relu_backward(dY, Yp, Gs); },
                     [&] { return max_abs_diff(Gp, Gs); }});
    cases.push_back({"pairwise_sqdist",
                     [&] { kernels::pairwise_sqdist(X, P, Dp); },
                     [&] { kernels::ref::pairwise_sqdist(X, P, Ds); },
                     [&] { return max_abs_diff(Dp, Ds); }});

    for (const auto& c : cases) run_case(c, 20);
    std::printf("\nall kernels bit-identical to the serial reference\n");
    return 0;
}
