#include <gtest/gtest.h>

#include "pcam/checkpoint.hpp"
#include "pcam/data.hpp"
#include "pcam/memory.hpp"

using namespace pcam;

namespace {

// One 3x16x16 image stored in a 2-layer width-64 relu network.
struct SingleItem {
	ExemplarSet data;
	PcnModel model;
	TrainTrace trace;
};

const SingleItem &single_item()
{
	static const SingleItem s = [] {
		SingleItem out;
		out.data = procedural_images(1, {3, 16, 16}, 5);
		out.model = init_model({out.data.dim(), 64, 64}, Activation::relu, 5);
		TrainConfig tc;
		tc.alpha = 0.01;
		tc.seed = 5;
		out.trace = store(out.model, out.data, tc);
		return out;
	}();
	return s;
}

// A few small images, batch-trained for a while; not converged.
struct SmallSet {
	ExemplarSet data;
	PcnModel model;
};

const SmallSet &small_set()
{
	static const SmallSet s = [] {
		SmallSet out;
		out.data = procedural_images(4, {3, 8, 8}, 9);
		out.model = init_model({out.data.dim(), 96, 96}, Activation::relu, 9);
		TrainConfig tc;
		tc.mode = UpdateMode::batch;
		tc.max_epochs = 300;
		tc.seed = 9;
		store(out.model, out.data, tc);
		return out;
	}();
	return s;
}

RetrievalConfig quick(int iterations = 1)
{
	RetrievalConfig rc;
	rc.steps = 60;
	rc.iterations = iterations;
	return rc;
}

}  // namespace

TEST(Store, SingleItemConverges)
{
	const auto &s = single_item();
	EXPECT_TRUE(s.trace.converged);
	EXPECT_LT(s.trace.final_energy(), 1e-5);
	const Vector out = denoise_retrieve(s.model, Vector(s.data.items.col(0)), quick(1));
	EXPECT_LT(mse_per_column(s.data.items, Matrix(out))(0), 1e-6);
}

TEST(Store, TraceDescendsAtTheEnd)
{
	// Soft check: over the final 10% of epochs the energy does not rise overall.
	const auto &e = single_item().trace.epoch_energy;
	ASSERT_GE(e.size(), 10u);
	const std::size_t from = e.size() - e.size() / 10;
	EXPECT_LE(e.back(), e[from - 1]);
}

TEST(Store, AllZerosPatternIsTrivial)
{
	ExemplarSet zeros;
	zeros.items = Matrix::Zero(12, 1);
	PcnModel m = init_model({12, 8, 8}, Activation::relu, 3);
	TrainConfig tc;
	tc.alpha = 0.05;
	tc.max_epochs = 20000;
	tc.energy_tol = 1e-13;
	EXPECT_TRUE(store(m, zeros, tc).converged);
	EXPECT_LT(generate(m).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Store, Contracts)
{
	PcnModel m = init_model({12, 8}, Activation::relu, 3);
	ExemplarSet empty;
	empty.items.resize(12, 0);
	EXPECT_THROW(store(m, empty, TrainConfig{}), invalid_input);
	ExemplarSet wrong;
	wrong.items = Matrix::Zero(11, 2);
	EXPECT_THROW(store(m, wrong, TrainConfig{}), dimension_error);
	TrainConfig bad;
	bad.gamma = 0;
	EXPECT_THROW(store(m, wrong, bad), invalid_input);
}

TEST(Store, Deterministic)
{
	const auto data = procedural_images(3, {1, 6, 6}, 2);
	auto a = init_model({36, 10, 10}, Activation::relu, 1);
	auto b = a;
	TrainConfig tc;
	tc.max_epochs = 20;
	tc.seed = 4;
	store(a, data, tc);
	store(b, data, tc);
	EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Denoise, ZeroIterationsIsIdentity)
{
	const auto &s = small_set();
	const Matrix q = Matrix::Constant(s.data.dim(), 2, 0.3);
	EXPECT_EQ(denoise_retrieve(s.model, q, quick(0)), q);
}

TEST(Denoise, AttractorOnConvergedModel)
{
	const auto &s = single_item();
	RetrievalConfig rc = quick(10);
	const Matrix out = denoise_retrieve(s.model, s.data.items, rc);
	EXPECT_LT(mse_per_column(s.data.items, out)(0), 1e-6);
}

TEST(Denoise, MonotoneRefinementOnConvergedModel)
{
	const auto &s = single_item();
	const Index trials = 20;
	Matrix queries(s.data.dim(), trials);
	for (Index i = 0; i < trials; ++i)
		queries.col(i) = corrupt_gaussian(s.data.items.col(0), 0.2, 100 + std::uint64_t(i));
	std::vector<Matrix> traj;
	denoise_retrieve(s.model, queries, quick(8), &traj);
	const Matrix target = s.data.items.col(0).replicate(1, trials);
	Index monotone = 0;
	for (Index i = 0; i < trials; ++i) {
		bool ok = true;
		for (std::size_t k = 0; k + 1 < traj.size(); ++k)
			ok &= mse_per_column(target.col(i), traj[k + 1].col(i))(0) <=
			      mse_per_column(target.col(i), traj[k].col(i))(0) + 1e-6;
		monotone += ok;
	}
	EXPECT_GE(double(monotone), 0.9 * double(trials));
	EXPECT_LT(mse_per_column(target, traj.back()).maxCoeff(), denoise_threshold);
}

TEST(Denoise, DimensionMismatch)
{
	const auto &s = small_set();
	EXPECT_THROW(denoise_retrieve(s.model, Matrix(Matrix::Zero(5, 1)), quick()), dimension_error);
}

TEST(Retrieval, FrozenWeights)
{
	const auto &s = small_set();
	const auto before = encode_checkpoint(s.model);
	denoise_retrieve(s.model, s.data.items, quick(2));
	Mask known = Mask::Constant(s.data.dim(), s.data.size(), false);
	known.topRows(50).setConstant(true);
	complete_retrieve(s.model, s.data.items, known, quick());
	EXPECT_EQ(encode_checkpoint(s.model), before);
}

TEST(Complete, FullMaskReturnsInput)
{
	const auto &s = small_set();
	const Mask all = Mask::Constant(s.data.dim(), s.data.size(), true);
	EXPECT_EQ(complete_retrieve(s.model, s.data.items, all, quick()), s.data.items);
}

TEST(Complete, KnownEntriesExact)
{
	const auto &s = small_set();
	const Index d = s.data.dim();
	Mask known(d, s.data.size());
	for (Index j = 0; j < s.data.size(); ++j)
		known.col(j) = make_mask(d, MaskKind::random_pixels, 0.5, {3, 8, 8}, std::uint64_t(j));
	const Matrix partial = known.select(s.data.items, Matrix::Zero(d, s.data.size()));
	const Matrix out = complete_retrieve(s.model, partial, known, quick());
	for (Index j = 0; j < out.cols(); ++j)
		for (Index i = 0; i < d; ++i)
			if (known(i, j)) {
				EXPECT_EQ(out(i, j), partial(i, j));
			}
	EXPECT_NE(out, partial);
}

TEST(Complete, Contracts)
{
	const auto &s = small_set();
	const Index d = s.data.dim();
	Mask none = Mask::Constant(d, 1, false);
	EXPECT_THROW(complete_retrieve(s.model, Matrix(s.data.items.col(0)), none, quick()), invalid_input);
	Mask one = Mask::Constant(d, 2, true);
	EXPECT_THROW(complete_retrieve(s.model, Matrix(s.data.items.col(0)), one, quick()), dimension_error);
}

TEST(Hetero, EntireVectorKnownReturnsInput)
{
	const auto &s = small_set();
	const Index d = s.data.dim();
	const ModalityLayout layout{Span{0, 150}, Span{150, d}};
	const Matrix out = hetero_retrieve(s.model, s.data.items, Span{0, d}, layout, quick());
	EXPECT_EQ(out, s.data.items);
}

TEST(Hetero, SpanInputsAndContracts)
{
	const auto &s = small_set();
	const Index d = s.data.dim();
	const ModalityLayout layout{Span{0, 150}, Span{150, d}};
	const Matrix caption = s.data.items.bottomRows(d - 150);
	const Matrix a = hetero_retrieve(s.model, caption, layout.caption, layout, quick());
	const Matrix b = hetero_retrieve(s.model, s.data.items, layout.caption, layout, quick());
	EXPECT_EQ(a, b);
	EXPECT_EQ(a.bottomRows(d - 150), caption);
	EXPECT_THROW(hetero_retrieve(s.model, caption, Span{150, d + 3}, layout, quick()), invalid_input);
	EXPECT_THROW(hetero_retrieve(s.model, caption, Span{-1, 10}, layout, quick()), invalid_input);
	EXPECT_THROW(hetero_retrieve(s.model, caption, Span{10, 20}, layout, quick()), invalid_input);
	EXPECT_THROW(hetero_retrieve(s.model, Matrix(Matrix::Zero(7, 1)), layout.caption, layout, quick()),
	             dimension_error);
}

TEST(Evaluate, Identity)
{
	const Matrix x = Matrix::Random(10, 4);
	const auto r = evaluate_retrieval(x, x, 0.005);
	EXPECT_EQ(r.rate, 1.0);
	for (const auto &it : r.per_item) EXPECT_EQ(it.mse, 0.0);
	EXPECT_EQ(r.wrong_attractors(), 0u);
}

TEST(Evaluate, OffsetByPointOne)
{
	const Matrix x = Matrix::Constant(8, 1, 0.5);
	const Matrix y = x.array() + 0.1;
	const auto r = evaluate_retrieval(x, y, 0.005);
	EXPECT_NEAR(r.per_item[0].mse, 0.01, 1e-12);
	EXPECT_FALSE(r.per_item[0].retrieved);
	EXPECT_EQ(r.rate, 0.0);
	EXPECT_TRUE(evaluate_retrieval(x, y, 0.011).per_item[0].retrieved);
}

TEST(Evaluate, RetrievedIffBelowThreshold)
{
	Matrix x = Matrix::Zero(4, 3);
	Matrix y = x;
	y(0, 1) = 0.5;  // mse exactly 0.0625
	y(0, 2) = 1.0;
	const auto r = evaluate_retrieval(x, y, 0.0625);
	EXPECT_TRUE(r.per_item[0].retrieved);
	EXPECT_FALSE(r.per_item[1].retrieved);
	EXPECT_FALSE(r.per_item[2].retrieved);
	EXPECT_NEAR(r.rate, 1.0 / 3.0, 1e-15);
}

TEST(Evaluate, WrongAttractorCounted)
{
	Matrix x(2, 2);
	x << 0, 1, 0, 1;
	Matrix y(2, 2);
	y << 1, 1, 1, 1;  // both outputs land on item 1
	const auto r = evaluate_retrieval(x, y, 0.005);
	EXPECT_EQ(r.wrong_attractors(), 1u);
}

TEST(Evaluate, Contracts)
{
	EXPECT_THROW(evaluate_retrieval(Matrix(0, 0), Matrix(0, 0), 0.005), invalid_input);
	EXPECT_THROW(evaluate_retrieval(Matrix(Matrix::Zero(3, 2)), Matrix(Matrix::Zero(3, 1)), 0.005),
	             invalid_input);
}
