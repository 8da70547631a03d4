#include <cmath>
#include <cstring>
#include <vector>

#include "unimat/kernels.hpp"

// Reference kernels.  Written as plain textbook loops: every output element is
// one scalar accumulation in a fixed order, independent of build flags or
// thread count.  The OpenMP kernels are checked against these.

namespace unimat::kernels::ref {

void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d) {
    for (int in = 0; in < d.n; ++in)
        for (int il = 0; il < d.l; ++il)
            for (int ih = 0; ih < d.h; ++ih)
                for (int iw = 0; iw < d.w; ++iw)
                    for (int co = 0; co < cout; ++co) {
                        double acc = bias ? bias[co] : 0.0;
                        for (int dl = -1; dl <= 1; ++dl)
                            for (int dh = -1; dh <= 1; ++dh)
                                for (int dw = -1; dw <= 1; ++dw) {
                                    int sl = il + dl, sh = ih + dh, sw = iw + dw;
                                    if (sl < 0 || sl >= d.l || sh < 0 || sh >= d.h ||
                                        sw < 0 || sw >= d.w)
                                        continue;
                                    int tap = (dl + 1) * 9 + (dh + 1) * 3 + (dw + 1);
                                    const double* xr =
                                        x + (((static_cast<long>(in) * d.l + sl) * d.h + sh) * d.w + sw) * cin;
                                    const double* wr =
                                        wt + (static_cast<long>(tap) * cin) * cout + co;
                                    for (int ci = 0; ci < cin; ++ci)
                                        acc += xr[ci] * wr[static_cast<long>(ci) * cout];
                                }
                        y[(((static_cast<long>(in) * d.l + il) * d.h + ih) * d.w + iw) * cout + co] = acc;
                    }
}

void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d) {
    // dx[q][ci] = sum over taps o of dy[q - o][co] * w[o][ci][co].
    for (int in = 0; in < d.n; ++in)
        for (int il = 0; il < d.l; ++il)
            for (int ih = 0; ih < d.h; ++ih)
                for (int iw = 0; iw < d.w; ++iw)
                    for (int ci = 0; ci < cin; ++ci) {
                        double acc = 0.0;
                        for (int dl = -1; dl <= 1; ++dl)
                            for (int dh = -1; dh <= 1; ++dh)
                                for (int dw = -1; dw <= 1; ++dw) {
                                    int ql = il - dl, qh = ih - dh, qw = iw - dw;
                                    if (ql < 0 || ql >= d.l || qh < 0 || qh >= d.h ||
                                        qw < 0 || qw >= d.w)
                                        continue;
                                    int tap = (dl + 1) * 9 + (dh + 1) * 3 + (dw + 1);
                                    const double* dyr =
                                        dy + (((static_cast<long>(in) * d.l + ql) * d.h + qh) * d.w + qw) * cout;
                                    const double* wr =
                                        wt + (static_cast<long>(tap) * cin + ci) * cout;
                                    for (int co = 0; co < cout; ++co)
                                        acc += dyr[co] * wr[co];
                                }
                        dx[(((static_cast<long>(in) * d.l + il) * d.h + ih) * d.w + iw) * cin + ci] = acc;
                    }
}

void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d) {
    std::memset(dw, 0, sizeof(double) * 27 * cin * cout);
    std::memset(dbias, 0, sizeof(double) * cout);
    for (int tap = 0; tap < 27; ++tap) {
        int dl = tap / 9 - 1, dh = (tap / 3) % 3 - 1, dw_ = tap % 3 - 1;
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (int in = 0; in < d.n; ++in)
                    for (int il = 0; il < d.l; ++il)
                        for (int ih = 0; ih < d.h; ++ih)
                            for (int iw = 0; iw < d.w; ++iw) {
                                int sl = il + dl, sh = ih + dh, sw = iw + dw_;
                                if (sl < 0 || sl >= d.l || sh < 0 || sh >= d.h ||
                                    sw < 0 || sw >= d.w)
                                    continue;
                                acc += x[(((static_cast<long>(in) * d.l + sl) * d.h + sh) * d.w + sw) * cin + ci] *
                                       dy[(((static_cast<long>(in) * d.l + il) * d.h + ih) * d.w + iw) * cout + co];
                            }
                dw[(static_cast<long>(tap) * cin + ci) * cout + co] = acc;
            }
    }
    long voxels = static_cast<long>(d.n) * d.l * d.h * d.w;
    for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        for (long p = 0; p < voxels; ++p) acc += dy[p * cout + co];
        dbias[co] = acc;
    }
}

void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows) {
    for (long r = 0; r < rows; ++r)
        for (int o = 0; o < out; ++o) {
            double acc = bias ? bias[o] : 0.0;
            for (int i = 0; i < in; ++i) acc += x[r * in + i] * wt[static_cast<long>(i) * out + o];
            y[r * out + o] = acc;
        }
}

void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows) {
    for (long r = 0; r < rows; ++r)
        for (int i = 0; i < in; ++i) {
            double acc = 0.0;
            const double* wr = wt + static_cast<long>(i) * out;
            for (int o = 0; o < out; ++o) acc += dy[r * out + o] * wr[o];
            dx[r * in + i] = acc;
        }
}

void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows) {
    for (int i = 0; i < in; ++i)
        for (int o = 0; o < out; ++o) {
            double acc = 0.0;
            for (long r = 0; r < rows; ++r) acc += x[r * in + i] * dy[r * out + o];
            dw[static_cast<long>(i) * out + o] = acc;
        }
    for (int o = 0; o < out; ++o) {
        double acc = 0.0;
        for (long r = 0; r < rows; ++r) acc += dy[r * out + o];
        dbias[o] = acc;
    }
}

void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn) {
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (long g = 0; g < static_cast<long>(n) * heads; ++g) {
        const double* qg = q + g * T * hd;
        const double* kg = k + g * T * hd;
        const double* vg = v + g * T * hd;
        double* og = out + g * T * hd;
        double* ag = attn + g * T * T;
        for (int i = 0; i < T; ++i) {
            double* arow = ag + static_cast<long>(i) * T;
            double mx = -1e300;
            for (int j = 0; j < T; ++j) {
                double acc = 0.0;
                for (int e = 0; e < hd; ++e) acc += qg[i * hd + e] * kg[j * hd + e];
                arow[j] = acc * scale;
                if (arow[j] > mx) mx = arow[j];
            }
            double z = 0.0;
            for (int j = 0; j < T; ++j) {
                arow[j] = std::exp(arow[j] - mx);
                z += arow[j];
            }
            for (int j = 0; j < T; ++j) arow[j] /= z;
            for (int e = 0; e < hd; ++e) {
                double acc = 0.0;
                for (int j = 0; j < T; ++j) acc += arow[j] * vg[j * hd + e];
                og[i * hd + e] = acc;
            }
        }
    }
}

void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv) {
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    long total = static_cast<long>(n) * heads * T * hd;
    for (long i = 0; i < total; ++i) {
        dq[i] = 0.0;
        dk[i] = 0.0;
        dv[i] = 0.0;
    }
    std::vector<double> dl(static_cast<std::size_t>(T));
    for (long g = 0; g < static_cast<long>(n) * heads; ++g) {
        const double* qg = q + g * T * hd;
        const double* kg = k + g * T * hd;
        const double* vg = v + g * T * hd;
        const double* ag = attn + g * T * T;
        const double* dog = dout + g * T * hd;
        double* dqg = dq + g * T * hd;
        double* dkg = dk + g * T * hd;
        double* dvg = dv + g * T * hd;
        for (int i = 0; i < T; ++i) {
            const double* arow = ag + static_cast<long>(i) * T;
            // dattn_ij = dout_i . v_j ; softmax backward gives dlogits.
            double dot = 0.0;
            for (int j = 0; j < T; ++j) {
                double da = 0.0;
                for (int e = 0; e < hd; ++e) da += dog[i * hd + e] * vg[j * hd + e];
                dl[j] = da;
                dot += da * arow[j];
            }
            for (int j = 0; j < T; ++j) dl[j] = arow[j] * (dl[j] - dot) * scale;
            for (int j = 0; j < T; ++j) {
                for (int e = 0; e < hd; ++e) {
                    dqg[i * hd + e] += dl[j] * kg[j * hd + e];
                    dkg[j * hd + e] += dl[j] * qg[i * hd + e];
                    dvg[j * hd + e] += arow[j] * dog[i * hd + e];
                }
            }
        }
    }
}

void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd) {
    int gc = C / groups;
    for (int in = 0; in < n; ++in)
        for (int g = 0; g < groups; ++g) {
            double m = 0.0;
            for (int s = 0; s < S; ++s)
                for (int c = g * gc; c < (g + 1) * gc; ++c)
                    m += x[(static_cast<long>(in) * S + s) * C + c];
            m /= static_cast<double>(S) * gc;
            double var = 0.0;
            for (int s = 0; s < S; ++s)
                for (int c = g * gc; c < (g + 1) * gc; ++c) {
                    double dv = x[(static_cast<long>(in) * S + s) * C + c] - m;
                    var += dv * dv;
                }
            var /= static_cast<double>(S) * gc;
            double rs = 1.0 / std::sqrt(var + eps);
            mean[static_cast<long>(in) * groups + g] = m;
            rstd[static_cast<long>(in) * groups + g] = rs;
            for (int s = 0; s < S; ++s)
                for (int c = g * gc; c < (g + 1) * gc; ++c) {
                    long idx = (static_cast<long>(in) * S + s) * C + c;
                    y[idx] = (x[idx] - m) * rs * gamma[c] + beta[c];
                }
        }
}

void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta) {
    int gc = C / groups;
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
    for (int in = 0; in < n; ++in)
        for (int g = 0; g < groups; ++g) {
            double m = mean[static_cast<long>(in) * groups + g];
            double rs = rstd[static_cast<long>(in) * groups + g];
            // Per-group reductions of dy*gamma and dy*gamma*xhat.
            double sum1 = 0.0, sum2 = 0.0;
            for (int s = 0; s < S; ++s)
                for (int c = g * gc; c < (g + 1) * gc; ++c) {
                    long idx = (static_cast<long>(in) * S + s) * C + c;
                    double dyh = dy[idx] * gamma[c];
                    sum1 += dyh;
                    sum2 += dyh * (x[idx] - m) * rs;
                }
            for (int s = 0; s < S; ++s)
                for (int c = g * gc; c < (g + 1) * gc; ++c) {
                    long idx = (static_cast<long>(in) * S + s) * C + c;
                    double xh = (x[idx] - m) * rs;
                    double dyh = dy[idx] * gamma[c];
                    dx[idx] = rs * (dyh - sum1 / cnt - xh * sum2 / cnt);
                }
        }
}

} // namespace unimat::kernels::ref
