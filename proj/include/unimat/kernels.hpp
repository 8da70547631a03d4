#pragma once

namespace unimat::kernels {

// Global switch between the tuned OpenMP kernels and the serial reference
// kernels.  The reference path is also the bit-reproducible path: its loops
// accumulate in a fixed textbook order regardless of machine or thread count.
bool& parallel_enabled();

struct conv_dims {
    int n, l, h, w;
};

// 3x3x3 convolution over an (n,l,h,w,c) channels-last tensor, zero padded so
// the spatial shape is preserved.  Weight layout is [tap][cin][cout] with
// tap = (dl+1)*9 + (dh+1)*3 + (dw+1), dl/dh/dw in {-1,0,1}.
namespace ref {
void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d);
void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d);
void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d);

// Dense layer over `rows` independent rows: y = x * w + b, weight layout
// [in][out].
void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows);
void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows);
void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows);

// Scaled dot-product attention over T tokens.  q,k,v,out: [n][heads][T][hd];
// attn: [n][heads][T][T] row-stochastic cache written by fwd and consumed by
// bwd.
void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn);
void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv);

// Group normalization over an (n,S,C) channels-last tensor; statistics are
// taken over S x (C/groups) entries per (example, group).  mean/rstd:
// [n][groups] caches.
void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd);
void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta);
} // namespace ref

namespace omp {
void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d);
void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d);
void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d);
void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows);
void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows);
void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows);
void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn);
void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv);
void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd);
void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta);
} // namespace omp

// Dispatching entry points used by the model code.
void conv3d_fwd(const double* x, int cin, const double* wt, const double* bias,
                double* y, int cout, conv_dims d);
void conv3d_bwd_data(const double* dy, int cout, const double* wt, double* dx,
                     int cin, conv_dims d);
void conv3d_bwd_weights(const double* x, int cin, const double* dy, int cout,
                        double* dw, double* dbias, conv_dims d);
void linear_fwd(const double* x, int in, const double* wt, const double* bias,
                double* y, int out, long rows);
void linear_bwd_data(const double* dy, int out, const double* wt, double* dx,
                     int in, long rows);
void linear_bwd_weights(const double* x, int in, const double* dy, int out,
                        double* dw, double* dbias, long rows);
void attention_fwd(const double* q, const double* k, const double* v, int n,
                   int heads, int T, int hd, double* out, double* attn);
void attention_bwd(const double* q, const double* k, const double* v,
                   const double* attn, const double* dout, int n, int heads,
                   int T, int hd, double* dq, double* dk, double* dv);
void groupnorm_fwd(const double* x, int n, int S, int C, int groups,
                   const double* gamma, const double* beta, double eps,
                   double* y, double* mean, double* rstd);
void groupnorm_bwd(const double* x, const double* mean, const double* rstd,
                   const double* gamma, const double* dy, int n, int S, int C,
                   int groups, double* dx, double* dgamma, double* dbeta);

} // namespace unimat::kernels
