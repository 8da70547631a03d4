// Times the tuned OpenMP kernels against the serial reference kernels on
// model-sized problems and reports per-call wall time, speedup, and the
// largest forward-output discrepancy between the two paths.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unimat/kernels.hpp"
#include "unimat/rng.hpp"

using namespace unimat;
using clock_type = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::size_t n, rng& r) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.gaussian();
    return v;
}

double time_call(const std::function<void()>& fn, int repeat) {
    fn();  // warm-up, also primes the thread pool
    auto t0 = clock_type::now();
    for (int i = 0; i < repeat; ++i) fn();
    auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeat;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void report(const char* name, double t_ref, double t_omp, double diff) {
    std::printf("%-22s %10.3f ms %10.3f ms %8.2fx %12.3e\n", name, t_ref, t_omp,
                t_ref / t_omp, diff);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark: serial reference vs OpenMP"};
    int repeat = 5, n = 4, cin = 32, cout_ = 32, heads = 2, hd = 16;
    kernels::conv_dims d{0, 8, 9, 18};
    app.add_option("--repeat", repeat, "timed iterations per kernel");
    app.add_option("--batch", n, "batch size");
    app.add_option("--channels", cin, "channel count");
    CLI11_PARSE(app, argc, argv);
    d.n = n;
    cout_ = cin;

    rng r(12345);
    const long voxels = static_cast<long>(n) * d.l * d.h * d.w;
    const int T = d.h * d.w;  // attention mixes tokens within each layer slab

    std::printf("batch=%d grid=%dx%dx%d channels=%d tokens=%d repeat=%d\n", n, d.l, d.h, d.w,
                cin, T, repeat);
    std::printf("%-22s %13s %13s %9s %12s\n", "kernel", "ref", "omp", "speedup", "max|diff|");

    // conv3d forward + both backward passes
    {
        auto x = random_vec(voxels * cin, r);
        auto wt = random_vec(27ul * cin * cout_, r);
        auto bias = random_vec(cout_, r);
        std::vector<double> y_ref(voxels * cout_), y_omp(y_ref.size());
        double t_ref = time_call([&] { kernels::ref::conv3d_fwd(x.data(), cin, wt.data(), bias.data(), y_ref.data(), cout_, d); }, repeat);
        double t_omp = time_call([&] { kernels::omp::conv3d_fwd(x.data(), cin, wt.data(), bias.data(), y_omp.data(), cout_, d); }, repeat);
        report("conv3d_fwd", t_ref, t_omp, max_abs_diff(y_ref, y_omp));

        auto dy = random_vec(voxels * cout_, r);
        std::vector<double> dx_ref(voxels * cin), dx_omp(dx_ref.size());
        t_ref = time_call([&] { kernels::ref::conv3d_bwd_data(dy.data(), cout_, wt.data(), dx_ref.data(), cin, d); }, repeat);
        t_omp = time_call([&] { kernels::omp::conv3d_bwd_data(dy.data(), cout_, wt.data(), dx_omp.data(), cin, d); }, repeat);
        report("conv3d_bwd_data", t_ref, t_omp, max_abs_diff(dx_ref, dx_omp));

        std::vector<double> dw_ref(wt.size()), dw_omp(wt.size()), db_ref(cout_), db_omp(cout_);
        t_ref = time_call([&] { kernels::ref::conv3d_bwd_weights(x.data(), cin, dy.data(), cout_, dw_ref.data(), db_ref.data(), d); }, repeat);
        t_omp = time_call([&] { kernels::omp::conv3d_bwd_weights(x.data(), cin, dy.data(), cout_, dw_omp.data(), db_omp.data(), d); }, repeat);
        report("conv3d_bwd_weights", t_ref, t_omp, max_abs_diff(dw_ref, dw_omp));
    }

    // dense layer on time-embedding-sized rows
    {
        const int in = 4 * cin, out = 4 * cin;
        const long rows = voxels;
        auto x = random_vec(rows * in, r);
        auto wt = random_vec(static_cast<std::size_t>(in) * out, r);
        auto bias = random_vec(out, r);
        std::vector<double> y_ref(rows * out), y_omp(y_ref.size());
        double t_ref = time_call([&] { kernels::ref::linear_fwd(x.data(), in, wt.data(), bias.data(), y_ref.data(), out, rows); }, repeat);
        double t_omp = time_call([&] { kernels::omp::linear_fwd(x.data(), in, wt.data(), bias.data(), y_omp.data(), out, rows); }, repeat);
        report("linear_fwd", t_ref, t_omp, max_abs_diff(y_ref, y_omp));

        auto dy = random_vec(rows * out, r);
        std::vector<double> dx_ref(rows * in), dx_omp(dx_ref.size());
        t_ref = time_call([&] { kernels::ref::linear_bwd_data(dy.data(), out, wt.data(), dx_ref.data(), in, rows); }, repeat);
        t_omp = time_call([&] { kernels::omp::linear_bwd_data(dy.data(), out, wt.data(), dx_omp.data(), in, rows); }, repeat);
        report("linear_bwd_data", t_ref, t_omp, max_abs_diff(dx_ref, dx_omp));

        std::vector<double> dw_ref(wt.size()), dw_omp(wt.size()), db_ref(out), db_omp(out);
        t_ref = time_call([&] { kernels::ref::linear_bwd_weights(x.data(), in, dy.data(), out, dw_ref.data(), db_ref.data(), rows); }, repeat);
        t_omp = time_call([&] { kernels::omp::linear_bwd_weights(x.data(), in, dy.data(), out, dw_omp.data(), db_omp.data(), rows); }, repeat);
        report("linear_bwd_weights", t_ref, t_omp, max_abs_diff(dw_ref, dw_omp));
    }

    // attention over one layer slab of tokens
    {
        const long qkv = static_cast<long>(n) * heads * T * hd;
        auto q = random_vec(qkv, r), k = random_vec(qkv, r), v = random_vec(qkv, r);
        std::vector<double> out_ref(qkv), out_omp(qkv);
        std::vector<double> attn_ref(static_cast<long>(n) * heads * T * T), attn_omp(attn_ref.size());
        double t_ref = time_call([&] { kernels::ref::attention_fwd(q.data(), k.data(), v.data(), n, heads, T, hd, out_ref.data(), attn_ref.data()); }, repeat);
        double t_omp = time_call([&] { kernels::omp::attention_fwd(q.data(), k.data(), v.data(), n, heads, T, hd, out_omp.data(), attn_omp.data()); }, repeat);
        report("attention_fwd", t_ref, t_omp, max_abs_diff(out_ref, out_omp));

        auto dout = random_vec(qkv, r);
        std::vector<double> dq_ref(qkv), dk_ref(qkv), dv_ref(qkv);
        std::vector<double> dq_omp(qkv), dk_omp(qkv), dv_omp(qkv);
        t_ref = time_call([&] { kernels::ref::attention_bwd(q.data(), k.data(), v.data(), attn_ref.data(), dout.data(), n, heads, T, hd, dq_ref.data(), dk_ref.data(), dv_ref.data()); }, repeat);
        t_omp = time_call([&] { kernels::omp::attention_bwd(q.data(), k.data(), v.data(), attn_ref.data(), dout.data(), n, heads, T, hd, dq_omp.data(), dk_omp.data(), dv_omp.data()); }, repeat);
        double diff = std::max({max_abs_diff(dq_ref, dq_omp), max_abs_diff(dk_ref, dk_omp),
                                max_abs_diff(dv_ref, dv_omp)});
        report("attention_bwd", t_ref, t_omp, diff);
    }

    // group norm over the full voxel grid
    {
        const int S = d.l * d.h * d.w, C = cin, groups = 8;
        auto x = random_vec(static_cast<long>(n) * S * C, r);
        auto gamma = random_vec(C, r), beta = random_vec(C, r);
        std::vector<double> y_ref(x.size()), y_omp(x.size());
        std::vector<double> mean_ref(static_cast<long>(n) * groups), rstd_ref(mean_ref.size());
        std::vector<double> mean_omp(mean_ref.size()), rstd_omp(mean_ref.size());
        double t_ref = time_call([&] { kernels::ref::groupnorm_fwd(x.data(), n, S, C, groups, gamma.data(), beta.data(), 1e-5, y_ref.data(), mean_ref.data(), rstd_ref.data()); }, repeat);
        double t_omp = time_call([&] { kernels::omp::groupnorm_fwd(x.data(), n, S, C, groups, gamma.data(), beta.data(), 1e-5, y_omp.data(), mean_omp.data(), rstd_omp.data()); }, repeat);
        report("groupnorm_fwd", t_ref, t_omp, max_abs_diff(y_ref, y_omp));

        auto dy = random_vec(x.size(), r);
        std::vector<double> dx_ref(x.size()), dx_omp(x.size());
        std::vector<double> dg_ref(C), dg_omp(C), db_ref(C), db_omp(C);
        t_ref = time_call([&] { kernels::ref::groupnorm_bwd(x.data(), mean_ref.data(), rstd_ref.data(), gamma.data(), dy.data(), n, S, C, groups, dx_ref.data(), dg_ref.data(), db_ref.data()); }, repeat);
        t_omp = time_call([&] { kernels::omp::groupnorm_bwd(x.data(), mean_ref.data(), rstd_ref.data(), gamma.data(), dy.data(), n, S, C, groups, dx_omp.data(), dg_omp.data(), db_omp.data()); }, repeat);
        report("groupnorm_bwd", t_ref, t_omp, max_abs_diff(dx_ref, dx_omp));
    }

    return 0;
}
