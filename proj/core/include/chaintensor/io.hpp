#pragma once

// File formats. CSV files start with a `# units:` comment line followed by the
// column header; readers skip lines starting with '#'.

#include <string>
#include <vector>

#include "chaintensor/common.hpp"
#include "chaintensor/models.hpp"
#include "chaintensor/spectral.hpp"
#include "chaintensor/tns.hpp"
#include "chaintensor/ttm.hpp"

namespace chaintensor::io {

inline constexpr const char* kUnitsNote = "energies in units of eps, times in units of 1/eps";

// Header t,re_rho_00,im_rho_00,re_rho_01,... (row-major over rho).
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory, double t0 = 0.0);
Trajectory read_trajectory_csv(const std::string& path);

// One object per step with the per-bond discarded weights, maximal bond and
// clipping count, plus run-level totals.
void write_truncation_json(const std::string& path, const EvolutionResult& result, const ChainState* final_state = nullptr);

// Binary container: 8-byte magic "CHTNTTM1", uint64 little-endian header
// length, JSON header {kind, d_sys, dt, M, K, decayed, norms}, then M
// matrices of d_sys^2 x d_sys^2 complex doubles (re, im) in row-major order.
void write_tensor_container(const std::string& path, const TransferTensorSet& tensors);
TransferTensorSet read_tensor_container(const std::string& path);

// t_k,norm for k = 1..M.
void write_norms_csv(const std::string& path, const TransferTensorSet& tensors);
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);
void write_steady_csv(const std::string& path, const std::vector<double>& betas, const std::vector<double>& populations);
// n,alpha,beta,omega,eta; eta_n couples site n to its left neighbour (eta_0: the system).
void write_coefficients_csv(const std::string& path, const ChainCoefficients& coefficients, const ChainParameters& chain);

}  // namespace chaintensor::io
