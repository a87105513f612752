#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "gradcheck.hpp"
#include "grid.hpp"
#include "memory.hpp"

namespace pcam {

struct MetricsRow {
	std::string task;
	int depth = 0;
	Index width = 0;
	Index n = 0;
	std::string corruption;
	std::optional<double> threshold;  // empty: exact caption match
	Index retrieved = 0;
	Index total = 0;
	double rate = 0.0;
	double mean_mse = 0.0;
	double seconds = 0.0;  // wall time per retrieved item
	std::uint64_t seed = 0;
	std::string config;    // resolved config of the sweep point
};

struct RunArtifacts {
	std::vector<MetricsRow> rows;  // one per sweep point, in sweep order
	std::size_t best = 0;          // index into rows
	std::vector<std::string> grids;
	std::vector<std::string> checkpoints;
	std::string metrics_path;
};

inline const char *metrics_header()
{
	return "task,depth,width,N,corruption,threshold,retrieved,total,rate,mean_mse,seconds,seed";
}

inline std::string format_row(const MetricsRow &r)
{
	std::ostringstream o;
	o << std::setprecision(10);
	o << r.task << ',' << r.depth << ',' << r.width << ',' << r.n << ',' << r.corruption << ',';
	if (r.threshold) o << *r.threshold;
	else o << "exact";
	o << ',' << r.retrieved << ',' << r.total << ',' << r.rate << ',' << r.mean_mse << ','
	  << r.seconds << ',' << r.seed;
	return o.str();
}

/// Highest rate, then lowest mean MSE, then lexicographically smallest config.
inline std::size_t select_best(const std::vector<MetricsRow> &rows)
{
	if (rows.empty()) throw invalid_input("no rows to select from");
	std::size_t best = 0;
	for (std::size_t i = 1; i < rows.size(); ++i) {
		const MetricsRow &a = rows[i], &b = rows[best];
		if (a.rate != b.rate ? a.rate > b.rate
		                     : a.mean_mse != b.mean_mse ? a.mean_mse < b.mean_mse : a.config < b.config)
			best = i;
	}
	return best;
}

/// Seed of item `i` for per-item corruption draws.
inline std::uint64_t item_seed(std::uint64_t seed, Index i)
{
	return seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(i + 1);
}

struct PreparedData {
	ExemplarSet set;
	TensorShape image_shape;
	std::vector<std::string> captions;  // normalized, only with a caption corpus
	std::optional<Vocabulary> vocab;
};

inline PreparedData prepare_data(const ExperimentConfig &cfg)
{
	PreparedData out;
	ExemplarSet images;
	if (cfg.data.corpus == "procedural") {
		out.image_shape = cfg.data.shape;
		images = procedural_images(cfg.data.count, cfg.data.shape, cfg.seed);
	} else {
		const auto list = read_lines(cfg.data.corpus);
		if (Index(list.size()) < cfg.data.count)
			throw config_error("corpus lists fewer than N images", "data.N");
		const auto dir = std::filesystem::path(cfg.data.corpus).parent_path();
		for (Index i = 0; i < cfg.data.count; ++i) {
			std::filesystem::path p(list[std::size_t(i)]);
			if (p.is_relative()) p = dir / p;
			const ImageTensor t = read_tensor(p.string());
			if (i == 0) {
				out.image_shape = t.shape;
				images.items.resize(t.shape.size(), cfg.data.count);
			} else if (!(t.shape == out.image_shape)) {
				throw dimension_error("corpus image " + p.string() + " differs in shape");
			}
			images.items.col(i) = t.pixels;
		}
	}
	images.validate();
	if (cfg.effective_corruption() != CorruptionKind::modality) {
		out.set = std::move(images);
		return out;
	}
	const auto raw = read_captions(cfg.data.captions);
	out.vocab = cfg.data.vocab.empty() ? Vocabulary::from_corpus(raw) : read_vocabulary(cfg.data.vocab);
	for (Index i = 0; i < cfg.data.count && std::size_t(i) < raw.size(); ++i) {
		std::string norm;
		for (const auto &w : tokenize(raw[std::size_t(i)])) norm += (norm.empty() ? "" : " ") + w;
		out.captions.push_back(norm);
	}
	out.set = captioned_set(images, out.captions, *out.vocab, cfg.data.caption_length);
	out.set.validate();
	return out;
}

/// Corrupted queries for every item; `known` is set for masked cues.
struct Cue {
	Matrix queries;
	std::optional<Mask> known;
	std::string label;
	Span target;  // entries scored against the originals
	bool exact_caption = false;
};

inline Cue make_cue(const ExperimentConfig &cfg, const PreparedData &data)
{
	const Matrix &items = data.set.items;
	const Index d = items.rows(), n = items.cols();
	Cue cue;
	cue.target = Span{0, d};
	std::ostringstream label;
	switch (cfg.effective_corruption()) {
	case CorruptionKind::noise:
		cue.queries.resize(d, n);
		for (Index i = 0; i < n; ++i)
			cue.queries.col(i) = corrupt_gaussian(items.col(i), cfg.corruption.sigma,
			                                      item_seed(cfg.seed, i), cfg.corruption.scale);
		label << "noise:" << cfg.corruption.sigma
		      << (cfg.corruption.scale == NoiseScale::variance ? ":variance" : ":stddev");
		break;
	case CorruptionKind::mask: {
		Mask known(d, n);
		for (Index i = 0; i < n; ++i)
			known.col(i) = make_mask(d, cfg.corruption.mask, cfg.corruption.fraction,
			                         data.image_shape, item_seed(cfg.seed, i));
		cue.queries = known.select(items, Matrix::Zero(d, n));
		cue.known = std::move(known);
		label << "mask:" << to_string(cfg.corruption.mask) << ':' << cfg.corruption.fraction;
		break;
	}
	case CorruptionKind::modality: {
		const ModalityLayout layout = *data.set.layout;
		const bool from_caption = cfg.corruption.known == "caption";
		const Span given = from_caption ? layout.caption : layout.image;
		cue.target = from_caption ? layout.image : layout.caption;
		cue.exact_caption = !from_caption;
		const Mask known = span_mask(d, given).replicate(1, n);
		cue.queries = known.select(items, Matrix::Zero(d, n));
		cue.known = known;
		label << (from_caption ? "caption->image" : "image->caption");
		break;
	}
	}
	cue.label = label.str();
	return cue;
}

/// Scores outputs on the cue's target span.
inline MetricsRow score(const Cue &cue, const PreparedData &data, const Matrix &outputs,
                        double threshold)
{
	MetricsRow row;
	row.corruption = cue.label;
	row.total = outputs.cols();
	const Matrix orig = data.set.items.middleRows(cue.target.begin, cue.target.size());
	const Matrix got = outputs.middleRows(cue.target.begin, cue.target.size());
	const Vector mse = mse_per_column(orig, got);
	row.mean_mse = mse.mean();
	if (cue.exact_caption) {
		for (Index i = 0; i < got.cols(); ++i)
			if (decode_caption(got.col(i), *data.vocab) == data.captions[std::size_t(i)]) ++row.retrieved;
	} else {
		row.threshold = threshold;
		row.retrieved = evaluate_retrieval(orig, got, threshold).retrieved_count();
	}
	row.rate = double(row.retrieved) / double(row.total);
	return row;
}

inline PcnModel train_pcn(const ExperimentConfig &cfg, const ExemplarSet &data, TrainTrace *trace = nullptr,
                          std::ostream *log = nullptr)
{
	if (!cfg.checkpoint.empty()) {
		PcnModel m = load_pcn(cfg.checkpoint);
		if (m.sensory_width() != data.dim())
			throw config_error("checkpoint sensory width differs from the data", "checkpoint");
		return m;
	}
	PcnModel model = init_model(cfg.model.widths(data.dim()), cfg.model.activation, cfg.seed);
	TrainConfig tc = cfg.train;
	tc.seed = cfg.seed;
	const TrainTrace t = store(model, data, tc, [&](int epoch, double e) {
		if (log && (epoch % 100 == 0 || epoch + 1 == tc.max_epochs))
			*log << "  epoch " << epoch << " mean energy " << e << '\n';
	});
	if (log) *log << "  trained " << t.epoch_energy.size() << " epochs, final energy " << t.final_energy()
	              << (t.converged ? " (converged)" : "") << '\n';
	if (trace) *trace = t;
	return model;
}

/// Hidden width n of a [d, n, n, d] autoencoder whose parameter count is closest to `params`.
inline Index matched_ae_width(Index d, Index params)
{
	// n^2 + (2d + 2) n + d = params
	const double b = 2.0 * double(d) + 2.0, c = double(d) - double(params);
	const double n = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
	return std::max<Index>(1, Index(std::llround(n)));
}

inline Index pcn_parameter_count(const std::vector<Index> &widths)
{
	Index p = widths.back();
	for (std::size_t l = 1; l < widths.size(); ++l) p += widths[l - 1] * widths[l];
	return p;
}

inline std::vector<Index> ae_widths(const ExperimentConfig &cfg, Index d)
{
	std::vector<Index> hidden = cfg.ae_hidden;
	if (cfg.ae_match_params) {
		const Index n = matched_ae_width(d, pcn_parameter_count(cfg.model.widths(d)));
		hidden = {n, n};
	} else if (hidden.empty()) {
		hidden = {cfg.model.width, cfg.model.width};
	}
	std::vector<Index> w{d};
	w.insert(w.end(), hidden.begin(), hidden.end());
	w.push_back(d);
	return w;
}

namespace detail {

inline ImageTensor tile(const PreparedData &data, const Vector &column)
{
	return ImageTensor(data.image_shape, column.head(data.image_shape.size()));
}

inline std::string training_key(const ExperimentConfig &cfg)
{
	std::string key = cfg.effective_corruption() == CorruptionKind::modality ? "modality" : "plain";
	for (const auto &[k, v] : resolved_fields(cfg))
		if (k.rfind("model.", 0) == 0 || k.rfind("train.", 0) == 0 || k.rfind("data.", 0) == 0 ||
		    k == "seed" || k == "checkpoint")
			key += ";" + k + "=" + v;
	return key;
}

}  // namespace detail

/**
 * Runs every sweep point of `base`, writing metrics.csv, configs.txt,
 * best.txt, grids and checkpoints under the output directory. Trained PCNs
 * are shared between points that differ only in retrieval settings.
 */
inline RunArtifacts run_experiment(const ExperimentConfig &base, std::ostream *log = nullptr)
{
	validate_config(base);
	namespace fs = std::filesystem;
	const fs::path out_dir(base.out_dir);
	std::error_code ec;
	fs::create_directories(out_dir, ec);
	if (ec) throw io_error("cannot create output directory: " + ec.message(), base.out_dir);

	RunArtifacts art;
	std::map<std::string, std::size_t> model_index;
	std::vector<PcnModel> models;
	std::map<std::string, PreparedData> data_cache;

	const auto points = expand_sweeps(base);
	for (std::size_t p = 0; p < points.size(); ++p) {
		const ExperimentConfig &cfg = points[p];
		const std::string resolved = resolved_string(cfg);
		if (log) *log << "[" << p + 1 << "/" << points.size() << "] " << to_string(cfg.task) << '\n';

		if (cfg.task == Task::gradcheck) {
			const auto rep = gradcheck(cfg.gradcheck_widths, cfg.gradcheck_activation,
			                           cfg.gradcheck_trials, cfg.gradcheck_h, cfg.seed);
			MetricsRow row;
			row.task = "gradcheck";
			row.depth = int(cfg.gradcheck_widths.size()) - 1;
			row.width = cfg.gradcheck_widths[1];
			row.n = rep.trials;
			row.corruption = "fd:h=" + detail::fmt(cfg.gradcheck_h);
			row.threshold = rep.tolerance;
			row.retrieved = rep.passed() ? 1 : 0;
			row.total = 1;
			row.rate = double(row.retrieved);
			row.mean_mse = rep.max_error();
			row.seed = cfg.seed;
			row.config = resolved;
			art.rows.push_back(row);
			continue;
		}

		const std::string dkey = detail::training_key(cfg);
		if (!data_cache.count(dkey)) data_cache.emplace(dkey, prepare_data(cfg));
		const PreparedData &data = data_cache.at(dkey);
		const Cue cue = make_cue(cfg, data);
		const Index d = data.set.dim();
		const double threshold = cfg.effective_threshold();
		RetrievalConfig rc = cfg.retrieval;
		rc.threshold = threshold;

		Matrix outputs;
		std::vector<Matrix> trajectory;
		int depth = 0;
		Index width = 0;
		std::chrono::steady_clock::duration elapsed{};
		auto timed = [&](auto &&fn) {
			const auto t0 = std::chrono::steady_clock::now();
			fn();
			elapsed = std::chrono::steady_clock::now() - t0;
		};
		const Mask *known = cue.known ? &*cue.known : nullptr;

		if (cfg.task == Task::mhn_compare) {
			const MhnModel mhn = mhn_build(data.set, cfg.mhn_beta, cfg.mhn_copies);
			width = mhn.patterns.cols();
			timed([&] { outputs = mhn_retrieve(mhn, cue.queries, cfg.mhn_iterations, known); });
		} else if (cfg.task == Task::ae_compare) {
			const auto widths = ae_widths(cfg, d);
			if (log) *log << "  training autoencoder\n";
			const AeModel ae = ae_train(widths, data.set, cfg.ae_epochs, cfg.ae_lr, cfg.seed);
			depth = int(widths.size()) - 2;
			width = widths[1];
			const std::string path = (out_dir / ("ae_" + std::to_string(p) + ".pcam")).string();
			save_model(ae, path);
			art.checkpoints.push_back(path);
			timed([&] { outputs = ae_retrieve(ae, cue.queries, cfg.ae_iterations, known); });
		} else {
			if (!model_index.count(dkey)) {
				if (log) *log << "  training PCN\n";
				models.push_back(train_pcn(cfg, data.set, nullptr, log));
				model_index[dkey] = models.size() - 1;
				const std::string path =
				    (out_dir / ("pcn_" + std::to_string(models.size() - 1) + ".pcam")).string();
				save_model(models.back(), path);
				art.checkpoints.push_back(path);
			}
			const PcnModel &model = models[model_index.at(dkey)];
			depth = int(model.depth());
			width = model.widths[1];
			if (cfg.task == Task::denoise)
				timed([&] { outputs = denoise_retrieve(model, cue.queries, rc, &trajectory); });
			else
				timed([&] { outputs = complete_retrieve(model, cue.queries, *known, rc); });
		}

		MetricsRow row = score(cue, data, outputs, threshold);
		row.task = std::string(to_string(cfg.task));
		row.depth = depth;
		row.width = width;
		row.n = data.set.size();
		row.seconds = std::chrono::duration<double>(elapsed).count() / double(row.total);
		row.seed = cfg.seed;
		row.config = resolved;
		if (log) *log << "  " << row.corruption << ": " << row.retrieved << "/" << row.total
		              << " retrieved, mean MSE " << row.mean_mse << '\n';
		art.rows.push_back(row);

		const bool images = cue.target.begin == 0 && data.image_shape.size() <= d;
		const Index shown = std::min<Index>(cfg.grid_items, data.set.size());
		if (shown > 0 && images && !cue.exact_caption) {
			std::vector<std::vector<ImageTensor>> grid;
			auto row_of = [&](auto &&column) {
				std::vector<ImageTensor> r;
				for (Index i = 0; i < shown; ++i) r.push_back(detail::tile(data, column(i)));
				return r;
			};
			auto original = row_of([&](Index i) { return Vector(data.set.items.col(i)); });
			auto recon = row_of([&](Index i) { return Vector(outputs.col(i).cwiseMax(0.0).cwiseMin(1.0)); });
			auto cue_row = row_of([&](Index i) { return Vector(cue.queries.col(i).cwiseMax(0.0).cwiseMin(1.0)); });
			std::vector<ImageTensor> diff;
			for (Index i = 0; i < shown; ++i)
				diff.push_back(difference_image(original[std::size_t(i)], recon[std::size_t(i)]));
			if (cfg.effective_corruption() == CorruptionKind::noise)
				grid = {original, cue_row, recon, diff};
			else if (cfg.effective_corruption() == CorruptionKind::mask)
				grid = {cue_row, recon, original, diff};
			else
				grid = {recon, original, diff};
			const std::string path = (out_dir / ("grid_" + std::to_string(p) + ".ppm")).string();
			emit_grid(grid, path);
			art.grids.push_back(path);

			if (!trajectory.empty() && !cfg.grid_iterations.empty()) {
				std::vector<std::vector<ImageTensor>> steps{cue_row};
				for (int k : cfg.grid_iterations) {
					if (k < 1 || k > int(trajectory.size()))
						throw config_error("iteration " + std::to_string(k) + " was not run",
						                   "grid.iterations");
					const Matrix &m = trajectory[std::size_t(k - 1)];
					steps.push_back(row_of([&](Index i) { return Vector(m.col(i)); }));
				}
				steps.push_back(original);
				const std::string ipath =
				    (out_dir / ("iterations_" + std::to_string(p) + ".ppm")).string();
				emit_grid(steps, ipath);
				art.grids.push_back(ipath);
			}
		}
	}

	art.best = select_best(art.rows);
	art.metrics_path = (out_dir / "metrics.csv").string();
	{
		std::ofstream csv(art.metrics_path);
		if (!csv) throw io_error("cannot write metrics", art.metrics_path);
		csv << metrics_header() << '\n';
		for (const auto &r : art.rows) csv << format_row(r) << '\n';
	}
	{
		const std::string path = (out_dir / "configs.txt").string();
		std::ofstream cfgs(path);
		if (!cfgs) throw io_error("cannot write configs", path);
		for (std::size_t i = 0; i < art.rows.size(); ++i) cfgs << i << '\t' << art.rows[i].config << '\n';
	}
	{
		const std::string path = (out_dir / "best.txt").string();
		std::ofstream best(path);
		if (!best) throw io_error("cannot write best point", path);
		best << "row " << art.best << '\n'
		     << metrics_header() << '\n'
		     << format_row(art.rows[art.best]) << '\n'
		     << art.rows[art.best].config << '\n';
	}
	return art;
}

}  // namespace pcam
