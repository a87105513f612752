#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "exemplars.hpp"
#include "pcn.hpp"
#include "random.hpp"

namespace pcam {

// ---------------------------------------------------------------------------
// Modern Hopfield network

struct MhnModel {
	Matrix patterns;  // d x M, M = copies * N
	double beta = 1.0;
	int copies = 1;

	Index dim() const { return patterns.rows(); }
};

inline const std::vector<double> &default_beta_grid()
{
	static const std::vector<double> grid{1, 2, 3, 5, 10, 100, 1000};
	return grid;
}

inline const std::vector<int> &default_copies_grid()
{
	static const std::vector<int> grid{1, 3, 5};
	return grid;
}

/// One-shot storage: every item becomes `copies` adjacent columns.
inline MhnModel mhn_build(const ExemplarSet &items, double beta, int copies = 1)
{
	if (items.size() == 0) throw invalid_input("cannot build a Hopfield memory from nothing");
	if (!(beta > 0.0) || !std::isfinite(beta)) throw invalid_input("beta must be positive");
	if (copies < 1) throw invalid_input("copies must be >= 1");
	MhnModel m;
	m.beta = beta;
	m.copies = copies;
	m.patterns.resize(items.dim(), items.size() * copies);
	for (Index i = 0; i < items.size(); ++i)
		for (int c = 0; c < copies; ++c) m.patterns.col(i * copies + c) = items.items.col(i);
	return m;
}

/// softmax(beta * X^T q) for every query column.
inline Matrix mhn_weights(const MhnModel &model, const Matrix &queries)
{
	if (queries.rows() != model.dim()) throw dimension_error("query length differs from pattern length");
	Matrix a = model.beta * (model.patterns.transpose() * queries);
	for (Index j = 0; j < a.cols(); ++j) {
		auto col = a.col(j);
		col.array() -= col.maxCoeff();
		col = col.array().exp().matrix();
		col /= col.sum();
	}
	return a;
}

inline Matrix mhn_step(const MhnModel &model, const Matrix &queries)
{
	return model.patterns * mhn_weights(model, queries);
}

inline Vector mhn_step(const MhnModel &model, const Vector &query)
{
	return mhn_step(model, Matrix(query)).col(0);
}

/// Iterated update; with a mask, known entries are reset to the query after each step.
inline Matrix mhn_retrieve(const MhnModel &model, const Matrix &queries, int iters,
                           const Mask *known = nullptr)
{
	if (iters < 1) throw invalid_input("Hopfield retrieval needs at least one iteration");
	if (known && (known->rows() != queries.rows() || known->cols() != queries.cols()))
		throw dimension_error("mask shape differs from the queries");
	Matrix q = queries;
	for (int k = 0; k < iters; ++k) {
		q = mhn_step(model, q);
		if (known) q = known->select(queries, q);
	}
	return q;
}

// ---------------------------------------------------------------------------
// Backprop autoencoder

/**
 * Fully connected autoencoder [d, n_1, ..., n_k, d]. Hidden layers use
 * `activation`, the output layer is linear.
 */
struct AeModel {
	std::vector<Index> widths;
	std::vector<Matrix> weights;  // weights[l] maps layer l to l+1: n_{l+1} x n_l
	std::vector<Vector> biases;
	Activation activation = Activation::relu;

	Index dim() const { return widths.front(); }

	std::size_t parameter_count() const
	{
		std::size_t n = 0;
		for (std::size_t l = 0; l < weights.size(); ++l)
			n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
		return n;
	}
};

inline AeModel ae_init(const std::vector<Index> &widths, Activation activation, std::uint64_t seed)
{
	check_widths(widths, 3);
	if (widths.front() != widths.back())
		throw invalid_architecture("autoencoder output width must equal its input width");
	AeModel m;
	m.widths = widths;
	m.activation = activation;
	Rng rng = make_rng(seed, "ae-init");
	for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
		const double bound = 1.0 / std::sqrt(double(widths[l]));
		std::uniform_real_distribution<double> u(-bound, bound);
		Matrix w(widths[l + 1], widths[l]);
		for (Index i = 0; i < w.rows(); ++i)
			for (Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
		Vector b(widths[l + 1]);
		for (Index i = 0; i < b.size(); ++i) b(i) = u(rng);
		m.weights.push_back(std::move(w));
		m.biases.push_back(std::move(b));
	}
	return m;
}

namespace detail {

struct AeForward {
	std::vector<Matrix> pre;   // pre-activations per layer 1..K
	std::vector<Matrix> post;  // post[0] = input, post[l] = layer l output
};

inline AeForward ae_forward(const AeModel &m, const Matrix &x)
{
	if (x.rows() != m.dim()) throw dimension_error("autoencoder input length mismatch");
	AeForward f;
	f.post.push_back(x);
	const std::size_t K = m.weights.size();
	for (std::size_t l = 0; l < K; ++l) {
		Matrix z = m.weights[l] * f.post.back();
		z.colwise() += m.biases[l];
		f.post.push_back(l + 1 == K ? z : activate(m.activation, z));
		f.pre.push_back(std::move(z));
	}
	return f;
}

}  // namespace detail

inline Matrix ae_forward(const AeModel &m, const Matrix &x)
{
	return detail::ae_forward(m, x).post.back();
}

/// Training loss: mean over items of 0.5 * ||reconstruction - item||^2.
inline double ae_loss(const AeModel &m, const Matrix &x)
{
	return 0.5 * (ae_forward(m, x) - x).squaredNorm() / double(x.cols());
}

struct AeGradients {
	std::vector<Matrix> weights;
	std::vector<Vector> biases;
};

/// Reverse-mode gradient of ae_loss.
inline AeGradients ae_gradients(const AeModel &m, const Matrix &x)
{
	const auto f = detail::ae_forward(m, x);
	const std::size_t K = m.weights.size();
	AeGradients g;
	g.weights.resize(K);
	g.biases.resize(K);
	Matrix delta = (f.post.back() - x) / double(x.cols());
	for (std::size_t l = K; l-- > 0;) {
		g.weights[l] = delta * f.post[l].transpose();
		g.biases[l] = delta.rowwise().sum();
		if (l > 0) {
			delta = m.weights[l].transpose() * delta;
			delta.array() *= activate_derivative(m.activation, f.pre[l - 1]).array();
		}
	}
	return g;
}

/// Full-batch gradient descent. The loss before every epoch is appended to `trace`.
inline AeModel ae_train(const std::vector<Index> &widths, const ExemplarSet &data, int epochs,
                        double lr, std::uint64_t seed, Activation activation = Activation::relu,
                        std::vector<double> *trace = nullptr)
{
	if (widths.size() < 3 || widths.front() != data.dim() || widths.back() != data.dim())
		throw invalid_architecture("autoencoder widths must start and end with the data dimension");
	if (data.size() == 0) throw invalid_input("cannot train on an empty dataset");
	if (!(lr >= 0.0)) throw invalid_input("learning rate must be non-negative");
	AeModel m = ae_init(widths, activation, seed);
	for (int e = 0; e < epochs; ++e) {
		if (trace) trace->push_back(ae_loss(m, data.items));
		if (lr == 0.0) continue;
		const AeGradients g = ae_gradients(m, data.items);
		for (std::size_t l = 0; l < m.weights.size(); ++l) {
			m.weights[l] -= lr * g.weights[l];
			m.biases[l] -= lr * g.biases[l];
		}
	}
	return m;
}

/**
 * Iterated reconstruction: the output, clipped to [0,1], is fed back as the
 * next input. With a mask, known entries are re-clamped after every pass.
 */
inline Matrix ae_retrieve(const AeModel &m, const Matrix &queries, int iters,
                          const Mask *known = nullptr)
{
	if (iters < 1) throw invalid_input("autoencoder retrieval needs at least one iteration");
	if (queries.rows() != m.dim()) throw dimension_error("query length differs from autoencoder input");
	if (known && (known->rows() != queries.rows() || known->cols() != queries.cols()))
		throw dimension_error("mask shape differs from the queries");
	Matrix q = queries;
	for (int k = 0; k < iters; ++k) {
		q = ae_forward(m, q).cwiseMax(0.0).cwiseMin(1.0);
		if (known) q = known->select(queries, q);
	}
	return q;
}

}  // namespace pcam
