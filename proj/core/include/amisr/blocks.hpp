#pragma once

// Architectural blocks as forward functions over the op layer.
//
// Every block comes in three pieces: declare_* appends its parameter layout
// (names, shapes, init) to a ParamSpecs list, *Params::bind pulls the same
// names out of a Binder, and *_forward evaluates it. Names are dotted paths
// under a caller-supplied prefix, e.g. "enc1.lgfi.sa.q_pw.w".

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amisr/ops.hpp"
#include "amisr/params.hpp"

namespace amisr::blocks {

enum class SkafPool { both, avg, max };

std::string to_string(SkafPool pool);
SkafPool skaf_pool_from_string(const std::string& name);

struct RdfeOptions {
  // Depthwise branch kernel sizes; {3,5,7} unless a single-path ablation.
  std::vector<int> kernels{3, 5, 7};
  // Attention-unit squeeze ratio; must divide the channel count.
  int au_reduction = 4;
};

struct LgfiOptions {
  bool use_sa = true;
  bool use_rdfe = true;
  bool use_skaf = true;
  // Replaces RDFE with a pointwise GELU MLP of the same width.
  bool ffn_instead_of_rdfe = false;
  int heads = 4;
  RdfeOptions rdfe;
  SkafPool skaf_pool = SkafPool::both;
};

// ---------------------------------------------------------------------------
// Parameter layouts

void declare_conv(ParamSpecs& specs, const std::string& name, int64_t cout, int64_t cin_per_group, int64_t k,
                  InitScheme init = InitScheme::he);
void declare_norm(ParamSpecs& specs, const std::string& name, int64_t channels);
void declare_sa(ParamSpecs& specs, const std::string& prefix, int64_t channels);
void declare_rdfe(ParamSpecs& specs, const std::string& prefix, int64_t channels, const RdfeOptions& opts);
void declare_ffn(ParamSpecs& specs, const std::string& prefix, int64_t channels);
void declare_skaf(ParamSpecs& specs, const std::string& prefix, int64_t channels);
void declare_edff(ParamSpecs& specs, const std::string& prefix, int64_t channels);
void declare_lgfi(ParamSpecs& specs, const std::string& prefix, int64_t channels, const LgfiOptions& opts);
void declare_downsample(ParamSpecs& specs, const std::string& prefix, int64_t channels);
void declare_upsample(ParamSpecs& specs, const std::string& prefix, int64_t channels);

// ---------------------------------------------------------------------------
// Bound parameters

template <typename T>
struct ConvParams {
  Var<T> w, b;
  static ConvParams bind(Binder<T>& binder, const std::string& name);
};

template <typename T>
struct NormParams {
  Var<T> gamma, beta;
  static NormParams bind(Binder<T>& binder, const std::string& name);
};

// Channel self-attention. Q, K, V come from a pointwise conv followed by a
// 3x3 depthwise conv; attention is a (C/heads)x(C/heads) map per head.
template <typename T>
struct SAParams {
  ConvParams<T> q_pw, k_pw, v_pw;
  ConvParams<T> q_dw, k_dw, v_dw;
  ConvParams<T> proj;
  int heads = 4;
  // Softmax temperature d in QK^T/sqrt(d). Zero means H*W.
  double scale_d = 0.0;
  static SAParams bind(Binder<T>& binder, const std::string& prefix, int heads);
};

template <typename T>
struct RDFEParams {
  std::vector<int> kernels;
  std::vector<ConvParams<T>> branches;
  ConvParams<T> au_squeeze, au_expand;
  ConvParams<T> merge;
  NormParams<T> frm_norm;
  ConvParams<T> frm_conv1, frm_conv2;
  ConvParams<T> hg_down, hg_up;
  static RDFEParams bind(Binder<T>& binder, const std::string& prefix, const RdfeOptions& opts);
};

template <typename T>
struct FFNParams {
  ConvParams<T> fc1, fc2;
  static FFNParams bind(Binder<T>& binder, const std::string& prefix);
};

template <typename T>
struct SKAFParams {
  ConvParams<T> k5, k7;
  SkafPool pool = SkafPool::both;
  static SKAFParams bind(Binder<T>& binder, const std::string& prefix, SkafPool pool = SkafPool::both);
};

template <typename T>
struct EDFFParams {
  ConvParams<T> reduce;
  SKAFParams<T> skaf;
  static EDFFParams bind(Binder<T>& binder, const std::string& prefix, SkafPool pool = SkafPool::both);
};

template <typename T>
struct LGFIParams {
  NormParams<T> norm;
  std::optional<SAParams<T>> sa;
  std::optional<RDFEParams<T>> rdfe;
  std::optional<FFNParams<T>> ffn;
  std::optional<SKAFParams<T>> skaf;
  static LGFIParams bind(Binder<T>& binder, const std::string& prefix, const LgfiOptions& opts);
};

template <typename T>
struct ResampleParams {
  ConvParams<T> conv;
  static ResampleParams bind(Binder<T>& binder, const std::string& prefix);
};

// ---------------------------------------------------------------------------
// Forward functions

template <typename T>
struct SAOutput {
  Var<T> out;
  // Softmax map, shape (N, heads, C/heads, C/heads).
  Var<T> attention;
};

template <typename T>
SAOutput<T> sa_forward_detailed(const Var<T>& x, const SAParams<T>& p);

template <typename T>
Var<T> sa_forward(const Var<T>& x, const SAParams<T>& p) {
  return sa_forward_detailed(x, p).out;
}

template <typename T>
struct RDFEOutput {
  Var<T> out;
  // Attention-unit weights shared by all branches, shape (N, C, H, W).
  Var<T> au_weights;
};

template <typename T>
RDFEOutput<T> rdfe_forward_detailed(const Var<T>& x, const RDFEParams<T>& p);

template <typename T>
Var<T> rdfe_forward(const Var<T>& x, const RDFEParams<T>& p) {
  return rdfe_forward_detailed(x, p).out;
}

template <typename T>
Var<T> ffn_forward(const Var<T>& x, const FFNParams<T>& p);

// Returns the two single-channel weight maps (X', X'').
template <typename T>
std::pair<Var<T>, Var<T>> skaf_forward(const Var<T>& x, const SKAFParams<T>& p);

template <typename T>
Var<T> lgfi_forward(const Var<T>& x, const LGFIParams<T>& p);

template <typename T>
Var<T> edff_forward(const Var<T>& x_e, const Var<T>& x_d, const EDFFParams<T>& p);

// (N,C,H,W) -> (N,2C,H/2,W/2) via a 3x3 stride-2 conv.
template <typename T>
Var<T> downsample(const Var<T>& x, const ResampleParams<T>& p);

// (N,C,H,W) -> (N,C/2,2H,2W) via a 2x2 stride-2 transposed conv.
template <typename T>
Var<T> upsample(const Var<T>& x, const ResampleParams<T>& p);

}  // namespace amisr::blocks
