#include <cmath>
#include <cstring>
#include <vector>

#include "unimat/kernels.hpp"

// Tuned kernels.  Inner loops run over the fastest-varying channel index so
// they vectorize; parallel loops are arranged so each output element is
// written by exactly one thread, making results independent of thread count.

namespace unimat::kernels::omp {

void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d) {
    long voxels = static_cast<long>(d.l) * d.h * d.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < d.n; ++in)
        for (long p = 0; p < voxels; ++p) {
            int il = static_cast<int>(p / (d.h * d.w));
            int ih = static_cast<int>((p / d.w) % d.h);
            int iw = static_cast<int>(p % d.w);
            double* __restrict yr = y + (static_cast<long>(in) * voxels + p) * cout;
            if (bias)
                std::memcpy(yr, bias, sizeof(double) * cout);
            else
                std::memset(yr, 0, sizeof(double) * cout);
            for (int tap = 0; tap < 27; ++tap) {
                int sl = il + tap / 9 - 1;
                int sh = ih + (tap / 3) % 3 - 1;
                int sw = iw + tap % 3 - 1;
                if (sl < 0 || sl >= d.l || sh < 0 || sh >= d.h || sw < 0 || sw >= d.w)
                    continue;
                const double* __restrict xr =
                    x + (((static_cast<long>(in) * d.l + sl) * d.h + sh) * d.w + sw) * cin;
                const double* __restrict wtap = wt + static_cast<long>(tap) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                    double a = xr[ci];
                    if (a == 0.0) continue;
                    const double* __restrict wr = wtap + static_cast<long>(ci) * cout;
                    for (int co = 0; co < cout; ++co) yr[co] += a * wr[co];
                }
            }
        }
}

void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d) {
    // Transpose weights to [tap][cout][cin] so the gather loop is a saxpy
    // over the contiguous cin axis.
    std::vector<double> wtr(static_cast<std::size_t>(27) * cin * cout);
#pragma omp parallel for schedule(static)
    for (int tap = 0; tap < 27; ++tap)
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co)
                wtr[(static_cast<long>(tap) * cout + co) * cin + ci] =
                    wt[(static_cast<long>(tap) * cin + ci) * cout + co];
    long voxels = static_cast<long>(d.l) * d.h * d.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < d.n; ++in)
        for (long p = 0; p < voxels; ++p) {
            int il = static_cast<int>(p / (d.h * d.w));
            int ih = static_cast<int>((p / d.w) % d.h);
            int iw = static_cast<int>(p % d.w);
            double* __restrict dxr = dx + (static_cast<long>(in) * voxels + p) * cin;
            std::memset(dxr, 0, sizeof(double) * cin);
            for (int tap = 0; tap < 27; ++tap) {
                int ql = il - (tap / 9 - 1);
                int qh = ih - ((tap / 3) % 3 - 1);
                int qw = iw - (tap % 3 - 1);
                if (ql < 0 || ql >= d.l || qh < 0 || qh >= d.h || qw < 0 || qw >= d.w)
                    continue;
                const double* __restrict dyr =
                    dy + (((static_cast<long>(in) * d.l + ql) * d.h + qh) * d.w + qw) * cout;
                const double* __restrict wtap = wtr.data() + static_cast<long>(tap) * cin * cout;
                for (int co = 0; co < cout; ++co) {
                    double a = dyr[co];
                    if (a == 0.0) continue;
                    const double* __restrict wr = wtap + static_cast<long>(co) * cin;
                    for (int ci = 0; ci < cin; ++ci) dxr[ci] += a * wr[ci];
                }
            }
        }
}

void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d) {
    long voxels = static_cast<long>(d.l) * d.h * d.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int tap = 0; tap < 27; ++tap)
        for (int ci = 0; ci < cin; ++ci) {
            int dl = tap / 9 - 1, dh = (tap / 3) % 3 - 1, dwo = tap % 3 - 1;
            double* __restrict dwr = dw + (static_cast<long>(tap) * cin + ci) * cout;
            std::memset(dwr, 0, sizeof(double) * cout);
            for (int in = 0; in < d.n; ++in)
                for (int il = 0; il < d.l; ++il) {
                    int sl = il + dl;
                    if (sl < 0 || sl >= d.l) continue;
                    for (int ih = 0; ih < d.h; ++ih) {
                        int sh = ih + dh;
                        if (sh < 0 || sh >= d.h) continue;
                        for (int iw = 0; iw < d.w; ++iw) {
                            int sw = iw + dwo;
                            if (sw < 0 || sw >= d.w) continue;
                            double a =
                                x[(((static_cast<long>(in) * d.l + sl) * d.h + sh) * d.w + sw) * cin + ci];
                            if (a == 0.0) continue;
                            const double* __restrict dyr =
                                dy + (((static_cast<long>(in) * d.l + il) * d.h + ih) * d.w + iw) * cout;
                            for (int co = 0; co < cout; ++co) dwr[co] += a * dyr[co];
                        }
                    }
                }
        }
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (long p = 0; p < static_cast<long>(d.n) * voxels; ++p) acc += dy[p * cout + co];
        dbias[co] = acc;
    }
}

void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
        double* __restrict yr = y + r * out;
        if (bias)
            std::memcpy(yr, bias, sizeof(double) * out);
        else
            std::memset(yr, 0, sizeof(double) * out);
        const double* __restrict xr = x + r * in;
        for (int i = 0; i < in; ++i) {
            double a = xr[i];
            if (a == 0.0) continue;
            const double* __restrict wr = wt + static_cast<long>(i) * out;
            for (int o = 0; o < out; ++o) yr[o] += a * wr[o];
        }
    }
}

void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows) {
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
        const double* __restrict dyr = dy + r * out;
        double* __restrict dxr = dx + r * in;
        for (int i = 0; i < in; ++i) {
            const double* __restrict wr = wt + static_cast<long>(i) * out;
            double acc = 0.0;
            for (int o = 0; o < out; ++o) acc += dyr[o] * wr[o];
            dxr[i] = acc;
        }
    }
}

void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in; ++i) {
        double* __restrict dwr = dw + static_cast<long>(i) * out;
        std::memset(dwr, 0, sizeof(double) * out);
        for (long r = 0; r < rows; ++r) {
            double a = x[r * in + i];
            if (a == 0.0) continue;
            const double* __restrict dyr = dy + r * out;
            for (int o = 0; o < out; ++o) dwr[o] += a * dyr[o];
        }
    }
    double* __restrict db = dbias;
    std::memset(db, 0, sizeof(double) * out);
    for (long r = 0; r < rows; ++r) {
        const double* __restrict dyr = dy + r * out;
        for (int o = 0; o < out; ++o) db[o] += dyr[o];
    }
}

void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn) {
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    long groups = static_cast<long>(n) * heads;
#pragma omp parallel for schedule(static)
    for (long g = 0; g < groups; ++g) {
        const double* qg = q + g * T * hd;
        const double* kg = k + g * T * hd;
        const double* vg = v + g * T * hd;
        double* og = out + g * T * hd;
        double* ag = attn + g * T * T;
        for (int i = 0; i < T; ++i) {
            double* arow = ag + static_cast<long>(i) * T;
            const double* __restrict qi = qg + static_cast<long>(i) * hd;
            double mx = -1e300;
            for (int j = 0; j < T; ++j) {
                const double* __restrict kj = kg + static_cast<long>(j) * hd;
                double acc = 0.0;
                for (int e = 0; e < hd; ++e) acc += qi[e] * kj[e];
                arow[j] = acc * scale;
                if (arow[j] > mx) mx = arow[j];
            }
            double z = 0.0;
            for (int j = 0; j < T; ++j) {
                arow[j] = std::exp(arow[j] - mx);
                z += arow[j];
            }
            double rz = 1.0 / z;
            for (int j = 0; j < T; ++j) arow[j] *= rz;
            double* __restrict oi = og + static_cast<long>(i) * hd;
            std::memset(oi, 0, sizeof(double) * hd);
            for (int j = 0; j < T; ++j) {
                double a = arow[j];
                const double* __restrict vj = vg + static_cast<long>(j) * hd;
                for (int e = 0; e < hd; ++e) oi[e] += a * vj[e];
            }
        }
    }
}

void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv) {
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    long groups = static_cast<long>(n) * heads;
#pragma omp parallel for schedule(static)
    for (long g = 0; g < groups; ++g) {
        const double* qg = q + g * T * hd;
        const double* kg = k + g * T * hd;
        const double* vg = v + g * T * hd;
        const double* ag = attn + g * T * T;
        const double* dog = dout + g * T * hd;
        double* dqg = dq + g * T * hd;
        double* dkg = dk + g * T * hd;
        double* dvg = dv + g * T * hd;
        std::memset(dqg, 0, sizeof(double) * T * hd);
        std::memset(dkg, 0, sizeof(double) * T * hd);
        std::memset(dvg, 0, sizeof(double) * T * hd);
        std::vector<double> dl(static_cast<std::size_t>(T));
        for (int i = 0; i < T; ++i) {
            const double* __restrict arow = ag + static_cast<long>(i) * T;
            const double* __restrict doi = dog + static_cast<long>(i) * hd;
            double dot = 0.0;
            for (int j = 0; j < T; ++j) {
                const double* __restrict vj = vg + static_cast<long>(j) * hd;
                double da = 0.0;
                for (int e = 0; e < hd; ++e) da += doi[e] * vj[e];
                dl[j] = da;
                dot += da * arow[j];
            }
            for (int j = 0; j < T; ++j) dl[j] = arow[j] * (dl[j] - dot) * scale;
            double* __restrict dqi = dqg + static_cast<long>(i) * hd;
            const double* __restrict qi = qg + static_cast<long>(i) * hd;
            for (int j = 0; j < T; ++j) {
                double a = dl[j];
                double p = arow[j];
                const double* __restrict kj = kg + static_cast<long>(j) * hd;
                double* __restrict dkj = dkg + static_cast<long>(j) * hd;
                double* __restrict dvj = dvg + static_cast<long>(j) * hd;
                for (int e = 0; e < hd; ++e) {
                    dqi[e] += a * kj[e];
                    dkj[e] += a * qi[e];
                    dvj[e] += p * doi[e];
                }
            }
        }
    }
}

void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd) {
    int gc = C / groups;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in)
        for (int g = 0; g < groups; ++g) {
            double m = 0.0;
            for (int s = 0; s < S; ++s) {
                const double* __restrict xr = x + (static_cast<long>(in) * S + s) * C + g * gc;
                for (int c = 0; c < gc; ++c) m += xr[c];
            }
            m /= static_cast<double>(S) * gc;
            double var = 0.0;
            for (int s = 0; s < S; ++s) {
                const double* __restrict xr = x + (static_cast<long>(in) * S + s) * C + g * gc;
                for (int c = 0; c < gc; ++c) {
                    double dv = xr[c] - m;
                    var += dv * dv;
                }
            }
            var /= static_cast<double>(S) * gc;
            double rs = 1.0 / std::sqrt(var + eps);
            mean[static_cast<long>(in) * groups + g] = m;
            rstd[static_cast<long>(in) * groups + g] = rs;
            for (int s = 0; s < S; ++s) {
                long base = (static_cast<long>(in) * S + s) * C + g * gc;
                for (int c = 0; c < gc; ++c)
                    y[base + c] = (x[base + c] - m) * rs * gamma[g * gc + c] + beta[g * gc + c];
            }
        }
}

void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta) {
    int gc = C / groups;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        int g = c / gc;
        double dg = 0.0, db = 0.0;
        for (int in = 0; in < n; ++in) {
            double m = mean[static_cast<long>(in) * groups + g];
            double rs = rstd[static_cast<long>(in) * groups + g];
            for (int s = 0; s < S; ++s) {
                long idx = (static_cast<long>(in) * S + s) * C + c;
                dg += dy[idx] * (x[idx] - m) * rs;
                db += dy[idx];
            }
        }
        dgamma[c] = dg;
        dbeta[c] = db;
    }
    double cnt = static_cast<double>(S) * gc;
#pragma omp parallel for collapse(2) schedule(static)
    for (int in = 0; in < n; ++in)
        for (int g = 0; g < groups; ++g) {
            double m = mean[static_cast<long>(in) * groups + g];
            double rs = rstd[static_cast<long>(in) * groups + g];
            double sum1 = 0.0, sum2 = 0.0;
            for (int s = 0; s < S; ++s) {
                long base = (static_cast<long>(in) * S + s) * C + g * gc;
                for (int c = 0; c < gc; ++c) {
                    double dyh = dy[base + c] * gamma[g * gc + c];
                    sum1 += dyh;
                    sum2 += dyh * (x[base + c] - m) * rs;
                }
            }
            for (int s = 0; s < S; ++s) {
                long base = (static_cast<long>(in) * S + s) * C + g * gc;
                for (int c = 0; c < gc; ++c) {
                    double xh = (x[base + c] - m) * rs;
                    double dyh = dy[base + c] * gamma[g * gc + c];
                    dx[base + c] = rs * (dyh - sum1 / cnt - xh * sum2 / cnt);
                }
            }
        }
}

} // namespace unimat::kernels::omp
