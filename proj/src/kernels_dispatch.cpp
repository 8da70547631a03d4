#include "unimat/kernels.hpp"

namespace unimat::kernels {

bool& parallel_enabled() {
    static bool on = true;
    return on;
}

#define UNIMAT_DISPATCH(fn, ...)                                               \
    do {                                                                       \
        if (parallel_enabled())                                                \
            omp::fn(__VA_ARGS__);                                              \
        else                                                                   \
            ref::fn(__VA_ARGS__);                                              \
    } while (0)

void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d) {
    UNIMAT_DISPATCH(conv3d_fwd, x, cin, wt, bias, y, cout, d);
}
void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d) {
    UNIMAT_DISPATCH(conv3d_bwd_data, dy, cout, wt, dx, cin, d);
}
void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d) {
    UNIMAT_DISPATCH(conv3d_bwd_weights, x, cin, dy, cout, dw, dbias, d);
}
void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows) {
    UNIMAT_DISPATCH(linear_fwd, x, in, wt, bias, y, out, rows);
}
void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows) {
    UNIMAT_DISPATCH(linear_bwd_data, dy, out, wt, dx, in, rows);
}
void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows) {
    UNIMAT_DISPATCH(linear_bwd_weights, x, in, dy, out, dw, dbias, rows);
}
void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn) {
    UNIMAT_DISPATCH(attention_fwd, q, k, v, n, heads, T, hd, out, attn);
}
void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv) {
    UNIMAT_DISPATCH(attention_bwd, q, k, v, attn, dout, n, heads, T, hd, dq, dk, dv);
}
void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd) {
    UNIMAT_DISPATCH(groupnorm_fwd, x, n, S, C, groups, gamma, beta, eps, y, mean, rstd);
}
void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta) {
    UNIMAT_DISPATCH(groupnorm_bwd, x, mean, rstd, gamma, dy, n, S, C, groups, dx, dgamma, dbeta);
}

#undef UNIMAT_DISPATCH

} // namespace unimat::kernels
