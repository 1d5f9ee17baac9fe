#pragma once

#include "eqptr/mesh_motion.hpp"
#include "eqptr/system.hpp"

#include <array>
#include <memory>

namespace eqptr {

struct ShapeMeshSpec {
  Index nx = 12;
  Index ny = 12;
  double amplitude = 0.1;  // top-boundary displacement per unit parameter
  double source = 10.0;
  double beta = 1.0;       // diffusivity 1 + beta u^2
  // QoI region (reference coordinates of element centroids)
  double region_x0 = 0.25, region_x1 = 0.75, region_y0 = 0.5, region_y1 = 1.0;
};

enum class MotionMode { full, reduced };

// Nonlinear diffusion  -div((1 + beta u^2) grad u) = s  on the unit square
// with u = 0 on the boundary, P1 triangles. The top boundary is displaced
// vertically by amplitude * sum_k mu_k sin((k+1) pi x); the interior
// follows by linear-elastic mesh motion. The QoI tracks a target state on a
// region and adds alpha/2 |mu|^2, distributed over elements by reference
// area fraction.
class ShapeDiffusionProblem : public UnassembledSystem {
 public:
  ShapeDiffusionProblem(const ShapeMeshSpec& spec, Index n_mu, double alpha,
                        MotionMode mode = MotionMode::reduced);

  Index num_states() const override { return static_cast<Index>(interior_nodes_.size()); }
  Index num_params() const override { return n_mu_; }
  const ElementConnectivity& connectivity() const override { return conn_; }
  std::optional<ParameterBox> parameter_box() const override { return box_; }

  const MeshPartition& partition() const { return part_; }
  const MotionBasis& motion_basis() const { return *motion_; }
  MotionMode motion_mode() const { return mode_; }

  void set_target(const Vector& u_target);
  void set_box(const ParameterBox& box);

  Index num_nodes() const { return static_cast<Index>(ref_coords_.size() / 2); }
  const Vector& reference_coords() const { return ref_coords_; }
  const std::array<Index, 3>& element_nodes(Index e) const { return tris_[e]; }
  bool in_region(Index e) const { return region_[e]; }
  // Element coordinates (x0,y0,x1,y1,x2,y2) under the active motion.
  Vector element_coords(Index e, const Vector& mu) const;
  // Signed areas of all elements at mu under the active motion.
  Vector element_areas(const Vector& mu) const;

 protected:
  void do_evaluate(Index e, const Vector& ue, const Vector& ue_nb, const Vector& mu,
                   unsigned flags, ElementEval& out) const override;

 private:
  ShapeMeshSpec spec_;
  Index n_mu_;
  double alpha_;
  MotionMode mode_;
  Vector ref_coords_;
  std::vector<std::array<Index, 3>> tris_;
  std::vector<Index> node_state_;  // state index or -1 on the boundary
  IndexList interior_nodes_;
  std::vector<bool> region_;
  std::vector<double> reg_weight_;
  ElementConnectivity conn_;
  MeshPartition part_;
  std::unique_ptr<MotionBasis> motion_;
  std::vector<Vector> base_coords_;  // element coordinates at mu = 0
  std::vector<Matrix> coord_jac_;    // d(element coords)/d mu
  Vector target_;
  std::optional<ParameterBox> box_;
};

struct ShapeSetup {
  std::unique_ptr<ShapeDiffusionProblem> system;
  Vector mu0;
  Vector mu_target;
};

Vector default_shape_target(Index n_mu);

// Builds the problem and generates the target state by solving at
// target_mu. mu0 = 0; box [-1, 1]^n_mu.
ShapeSetup make_shape_diffusion(const ShapeMeshSpec& spec = {}, Index n_mu = 6,
                                double alpha = 1e-3,
                                std::optional<Vector> target_mu = std::nullopt,
                                MotionMode mode = MotionMode::reduced);

}  // namespace eqptr
