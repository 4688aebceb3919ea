#include <gtest/gtest.h>

#include <random>

#include "qtherm/analytic.hpp"
#include "qtherm/models.hpp"
#include "qtherm/qcore.hpp"
#include "test_support.hpp"

using namespace qtherm;
using qtherm::test::random_density;
using qtherm::test::random_hermitian;

namespace {

// Index-contraction partial trace, written independently of the library.
Matrix brute_partial_trace(const Matrix& m, Index da, Index db, bool keep_a) {
  const Index d = keep_a ? da : db;
  Matrix out = Matrix::Zero(d, d);
  for (Index i = 0; i < da; ++i)
    for (Index k = 0; k < db; ++k)
      for (Index j = 0; j < da; ++j)
        for (Index l = 0; l < db; ++l) {
          if (keep_a && k == l) out(i, j) += m(i * db + k, j * db + l);
          if (!keep_a && i == j) out(k, l) += m(i * db + k, j * db + l);
        }
  return out;
}

Matrix pauli_z() {
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  return z;
}

}  // namespace

TEST(TensorProduct, IdentityTimesIdentity) {
  EXPECT_TRUE(tensor_product(Matrix(Matrix::Identity(3, 3)), Matrix(Matrix::Identity(2, 2))).isApprox(
      Matrix::Identity(6, 6)));
}

TEST(TensorProduct, ProductStateHasUnitTrace) {
  std::mt19937_64 gen(3);
  const DensityMatrix p = tensor_product(random_density(gen, 3), random_density(gen, 4));
  EXPECT_NEAR(p.matrix().trace().real(), 1.0, 1e-12);
  EXPECT_EQ(p.dim(), 12);
}

TEST(TensorProduct, SigmaZTimesIdentitySpectrum) {
  const Matrix m = kron(pauli_z(), Matrix(Matrix::Identity(2, 2)));
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const RealVector ev = es.eigenvalues();
  EXPECT_NEAR(ev(0), -1.0, 1e-14);
  EXPECT_NEAR(ev(1), -1.0, 1e-14);
  EXPECT_NEAR(ev(2), 1.0, 1e-14);
  EXPECT_NEAR(ev(3), 1.0, 1e-14);
}

TEST(TensorProduct, AIsTheSlowIndex) {
  const Vector a = StateVector::basis(3, 1).amplitudes();
  const Vector b = StateVector::basis(2, 1).amplitudes();
  const Vector ab = kron(a, b);
  EXPECT_EQ(ab(1 * 2 + 1), cplx(1.0));
}

TEST(PartialTrace, ProductStateReturnsFactor) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix ra = random_density(gen, 2 + trial % 4);
    const DensityMatrix rb = random_density(gen, 2 + trial % 3);
    const Matrix p = kron(ra.matrix(), rb.matrix());
    const Dims dims{ra.dim(), rb.dim()};
    EXPECT_LT((partial_trace(p, dims, Subsystem::A) - ra.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((partial_trace(p, dims, Subsystem::B) - rb.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PartialTrace, BellStateGivesMaximallyMixed) {
  Vector bell = Vector::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  const Matrix rho = bell * bell.adjoint();
  EXPECT_LT((partial_trace(rho, {2, 2}, Subsystem::A) - Matrix(Matrix::Identity(2, 2)) / 2.0).norm(), 1e-15);
  EXPECT_LT((reduced_a(bell, {2, 2}) - Matrix(Matrix::Identity(2, 2)) / 2.0).norm(), 1e-15);
}

TEST(PartialTrace, MatchesIndexContraction) {
  std::mt19937_64 gen(11);
  for (Index da : {2, 3})
    for (Index db : {2, 3}) {
      const DensityMatrix rho = random_density(gen, da * db);
      const Matrix ka = partial_trace(rho.matrix(), {da, db}, Subsystem::A);
      const Matrix kb = partial_trace(rho.matrix(), {da, db}, Subsystem::B);
      EXPECT_LT((ka - brute_partial_trace(rho.matrix(), da, db, true)).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_LT((kb - brute_partial_trace(rho.matrix(), da, db, false)).cwiseAbs().maxCoeff(), 1e-15);
      EXPECT_NEAR(ka.trace().real(), 1.0, 1e-12);
    }
}

TEST(PartialTrace, RejectsWrongDims) {
  EXPECT_THROW(partial_trace(Matrix(Matrix::Identity(6, 6)), {4, 2}, Subsystem::A), ShapeError);
}

TEST(Evolve, ZeroTimeIsIdentity) {
  std::mt19937_64 gen(1);
  const Propagator prop(random_hermitian(gen, 5));
  const DensityMatrix rho = random_density(gen, 5);
  EXPECT_LT((evolve(rho, prop, 0.0).matrix() - rho.matrix()).norm(), 1e-13);
}

TEST(Evolve, EigenstateOnlyAcquiresPhase) {
  std::mt19937_64 gen(2);
  const Propagator prop(random_hermitian(gen, 4));
  const StateVector psi(Vector(prop.eigenvectors().col(2)));
  const StateVector out = evolve(psi, prop, 7.3);
  EXPECT_NEAR(std::abs(psi.amplitudes().dot(out.amplitudes())), 1.0, 1e-12);
  const DensityMatrix rho = DensityMatrix::pure(psi);
  EXPECT_LT((evolve(rho, prop, 7.3).matrix() - rho.matrix()).norm(), 1e-12);
}

TEST(Evolve, JcmHalfRabiPeriodTransfersExcitation) {
  JcmParams p;
  p.rwa = true;
  const JointSystem sys = build_jcm(p);
  const Propagator prop(sys.hamiltonian());
  for (int n = 1; n <= 4; ++n) {
    const double t = M_PI / (2.0 * p.gamma * std::sqrt(static_cast<double>(n)));
    const StateVector out = evolve(StateVector::basis(sys.total(), (n - 1) * 2 + 1), prop, t);
    EXPECT_NEAR(std::norm(out.amplitudes()(n * 2)), 1.0, 1e-10) << "n = " << n;
  }
}

TEST(Evolve, PreservesTraceHermiticityPositivity) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = 2 + trial % 7;
    const Propagator prop(random_hermitian(gen, d));
    const DensityMatrix out = evolve(random_density(gen, d), prop, u(gen));
    EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-10);
    EXPECT_LT(hermiticity_error(out.matrix()), 1e-10);
    EXPECT_GT(min_eigenvalue(out), -1e-9);
  }
}

TEST(Entropy, PureStateIsZero) {
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::pure(StateVector::basis(3, 2))), 0.0, 1e-14);
}

TEST(Entropy, MaximallyMixedQubitIsLn2) {
  EXPECT_NEAR(von_neumann_entropy(DensityMatrix::maximally_mixed(2)), std::log(2.0), 1e-14);
}

TEST(Entropy, AdditiveOnProducts) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityMatrix a = random_density(gen, 3), b = random_density(gen, 4);
    EXPECT_NEAR(von_neumann_entropy(tensor_product(a, b)), von_neumann_entropy(a) + von_neumann_entropy(b), 1e-10);
  }
}

TEST(Entropy, UnitarilyInvariant) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityMatrix rho = random_density(gen, 5);
    const Propagator prop(random_hermitian(gen, 5));
    EXPECT_NEAR(von_neumann_entropy(evolve(rho, prop, 3.0)), von_neumann_entropy(rho), 1e-10);
  }
}

TEST(RelativeEntropy, SelfIsZero) {
  std::mt19937_64 gen(7);
  const DensityMatrix rho = random_density(gen, 4);
  EXPECT_NEAR(relative_entropy(rho, rho), 0.0, 1e-12);
}

TEST(RelativeEntropy, PureGroundAgainstMixedIsLn2) {
  EXPECT_NEAR(relative_entropy(DensityMatrix::pure(StateVector::basis(2, 0)), DensityMatrix::maximally_mixed(2)),
              std::log(2.0), 1e-14);
}

TEST(RelativeEntropy, MatchesDefinitionAndIsNonNegative) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix rho = random_density(gen, 4), sigma = random_density(gen, 4);
    // definition oracle: -S(rho) - tr(rho ln sigma), ln sigma by eigensolve
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma.matrix());
    const Matrix log_sigma =
        es.eigenvectors() * es.eigenvalues().array().log().matrix().cast<cplx>().asDiagonal() *
        es.eigenvectors().adjoint();
    const double oracle = -von_neumann_entropy(rho) - (rho.matrix() * log_sigma).trace().real();
    const double d = relative_entropy(rho, sigma);
    EXPECT_NEAR(d, oracle, 1e-10);
    EXPECT_GE(d, 0.0);
  }
}

TEST(RelativeEntropy, InfiniteOutsideSupport) {
  EXPECT_TRUE(std::isinf(
      relative_entropy(DensityMatrix::maximally_mixed(2), DensityMatrix::pure(StateVector::basis(2, 0)))));
}

TEST(DiagEntropy, EqualsVonNeumannForDiagonalState) {
  RealVector p(3);
  p << 0.5, 0.3, 0.2;
  const DensityMatrix rho = DensityMatrix::diagonal(p);
  Matrix h = Matrix::Zero(3, 3);
  h(0, 0) = 0.0;
  h(1, 1) = 1.0;
  h(2, 2) = 2.0;
  EXPECT_NEAR(diag_entropy(rho, Propagator(h)), von_neumann_entropy(rho), 1e-14);
}

TEST(DiagEntropy, SuperpositionInEnergyBasisIsLn2) {
  Vector v(2);
  v << 1.0, 1.0;
  const DensityMatrix rho = DensityMatrix::pure(StateVector::normalized(v));
  EXPECT_NEAR(diag_entropy(rho, Propagator(pauli_z())), std::log(2.0), 1e-14);
}

TEST(DiagEntropy, BoundsVonNeumannFromAbove) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix rho = random_density(gen, 5);
    EXPECT_GE(diag_entropy(rho, Propagator(random_hermitian(gen, 5))), von_neumann_entropy(rho) - 1e-12);
  }
}

TEST(DensityMatrixType, RejectsInvalidInput) {
  Matrix m = Matrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, PreconditionError);  // trace 2
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix{neg}, PositivityError);
  Matrix nh = Matrix::Identity(2, 2) / 2.0;
  nh(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix{nh}, PreconditionError);
  EXPECT_THROW(StateVector(Vector::Ones(2)), PreconditionError);
}

TEST(TraceDistance, OrthogonalPureStatesAreAtDistanceOne) {
  EXPECT_NEAR(trace_distance(DensityMatrix::pure(StateVector::basis(3, 0)), DensityMatrix::pure(StateVector::basis(3, 2))),
              1.0, 1e-14);
}
