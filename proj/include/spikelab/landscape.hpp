// The random landscape and its derivatives.
//
// Energy on the sphere |x|^2 = N:
//
//   H(x) = H0(x) - N * lambda * phi(m(x)),        m(x) = x_1 / sqrt(N),
//   H0(x) = sum_p a_p N^{-(p-1)/2} <W^(p), x^{tensor p}>,
//
// where each W^(p) has i.i.d. standard Gaussian entries (no symmetrization).
// This gives the exact covariance  Cov(H0(x), H0(y)) = N * xi(<x,y>/N) with
// xi(t) = sum_p a_p^2 t^p.
//
// Derivative evaluations are organized as contraction chains over the raw
// tensors using the kernels module: a gradient costs about two passes over
// the tensor data, a Hessian-vector product about four.  Second- and
// third-derivative diagonal contractions (Hessian trace, v3_i = sum_j
// d^3H0[e_i,e_j,e_j]) are lower-dimensional sums, evaluated by a small
// reference contraction engine that is also exposed for cross-checking the
// chain engine in tests.
#pragma once

#include <cstdint>

#include "spikelab/common.hpp"
#include "spikelab/rng.hpp"

namespace spikelab {

struct MixtureTerm {
  int p;     // tensor order, >= 1
  double a;  // amplitude, > 0
};

struct MixtureSpec {
  std::vector<MixtureTerm> terms;  // sorted by p, orders distinct; may be empty
};

// Validates (p >= 1, distinct, a > 0) and sorts by p.  An empty mixture is
// legal and means H0 = 0 (pure-signal landscape).
MixtureSpec make_mixture(std::vector<MixtureTerm> terms);

// Hash of (N, mixture terms), used to tie a Disorder to the mixture it was
// drawn for; never 0.
std::uint64_t mixture_fingerprint(const MixtureSpec& mix, int N);

double xi_value(const MixtureSpec& mix, double t);
double xi_d1(const MixtureSpec& mix, double t);
double xi_d2(const MixtureSpec& mix, double t);

// Exact covariance of the random part at overlap t = <x,y>/N: N * xi(t).
double covariance_oracle(const MixtureSpec& mix, int N, double t);

struct SignalSpec {
  double k = 3;       // phi(m) = m^k (integer k) or max(m,0)^k; requires k >= 1
  double lambda = 0;  // signal strength, >= 0
};

struct Tensor {
  int p = 0;
  int N = 0;
  Vec w;  // N^p entries, row-major (leftmost index slowest)
};

// Number of stored entries sum_p N^p; throws on overflow.
std::uint64_t mixture_entry_count(const MixtureSpec& mix, int N);

inline constexpr std::uint64_t kDefaultEntryBudget = std::uint64_t{1} << 27;

// One Gaussian tensor; the stream is a pure function of (seed, p), so a term
// is reproducible independently of the rest of the mixture.
Tensor sample_tensor(int p, int N, std::uint64_t seed);

struct Disorder {
  int N = 0;
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;  // mixture_fingerprint at sampling time; 0 = ad hoc
  std::vector<Tensor> tensors;    // aligned with MixtureSpec::terms
};

Disorder sample_disorder(const MixtureSpec& mix, int N, std::uint64_t seed,
                         std::uint64_t entry_budget = kDefaultEntryBudget);

struct Model {
  int N = 0;
  MixtureSpec mixture;
  SignalSpec signal;
  Disorder disorder;
};

Model make_model(MixtureSpec mix, SignalSpec sig, int N, std::uint64_t seed,
                 std::uint64_t entry_budget = kDefaultEntryBudget);
// Same, but adopting pre-sampled (e.g. cache-loaded) disorder; validates shape.
Model make_model_with_disorder(MixtureSpec mix, SignalSpec sig, Disorder dis);

// --- energies ---------------------------------------------------------------
// Per-term values H_p(x) = a_p N^{-(p-1)/2} <W^(p), x^{tensor p}>, one per
// mixture term.
void noise_energy_terms(const Model& mdl, const double* x, double* per_term);
double noise_energy(const Model& mdl, const double* x);
double signal_energy(const Model& mdl, const double* x);  // -N lambda phi(m)
double total_energy(const Model& mdl, const double* x);

// --- first derivatives (ambient, length-N outputs) --------------------------
void noise_gradient(const Model& mdl, const double* x, double* out);
// sum_p term_weight[p-index] * grad H_p; weights indexed like mixture.terms.
void noise_gradient_weighted(const Model& mdl, const double* x, const double* term_weights,
                             double* out);
void signal_gradient(const Model& mdl, const double* x, double* out);
void total_gradient(const Model& mdl, const double* x, double* out);
// P_x grad H: tangential (covariant) gradient driving the dynamics.
void covariant_gradient(const Model& mdl, const double* x, double* out);

// --- second derivatives ------------------------------------------------------
void noise_hvp(const Model& mdl, const double* x, const double* v, double* out);
void total_hvp(const Model& mdl, const double* x, const double* v, double* out);
double noise_hessian_trace(const Model& mdl, const double* x);
double noise_hessian_trace_weighted(const Model& mdl, const double* x,
                                    const double* term_weights);
// Riemannian Hessian of H applied to a tangent vector v at x:
//   P d2H (P v) - ((x . dH)/N) P v.
void riemannian_hvp(const Model& mdl, const double* x, const double* v, double* out);
// Operator-norm estimate of the Riemannian Hessian at x by power iteration
// on riemannian_hvp (the operator is symmetric on the tangent space).
double riemannian_hessian_opnorm(const Model& mdl, const double* x, int iters,
                                 std::uint64_t seed);

// --- third-derivative diagonal ----------------------------------------------
// out[i] = sum_j d^3 H0 [e_i, e_j, e_j](x).
void noise_third_diag(const Model& mdl, const double* x, double* out);

// --- reference contraction engine (independent of the chain engine) ---------
// Contracts a raw tensor (no mixture prefactor) with one vector per slot:
//   kX -> x, kV -> v, kFree -> output index, kDiag -> shared summed index.
// At most one kFree slot; kDiag slots (if any, >= 2 of them) share a single
// summation index.  Scalar form requires no kFree slot; vector form exactly
// one.  O(N^{#kX + #kV} * N^{free} * N^{diag>0}) — diagnostic-grade cost.
enum class Slot { kX, kV, kFree, kDiag };
double reference_contraction_scalar(const Tensor& t, const std::vector<Slot>& slots,
                                    const double* x, const double* v);
void reference_contraction_vec(const Tensor& t, const std::vector<Slot>& slots, const double* x,
                               const double* v, double* out);

}  // namespace spikelab
