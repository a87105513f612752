// Command-line front end: training, retrieval experiments, gradient checks
// and image grids. Exit codes: 0 ok, 2 config error, 3 I/O error,
// 4 gradcheck failure, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcam/pcam.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_gradcheck = 4;

struct Options {
	std::string config_path;
	std::vector<std::string> overrides;
	std::optional<std::uint64_t> seed;
	std::optional<std::string> out;
	bool quiet = false;
};

pcam::ExperimentConfig build_config(const Options &opt, std::optional<pcam::Task> task)
{
	pcam::ExperimentConfig cfg;
#ifdef PCAM_DATA_DIR
	cfg.data.captions = std::string(PCAM_DATA_DIR) + "/captions.txt";
#endif
	if (!opt.config_path.empty()) cfg = pcam::load_config(opt.config_path, cfg);
	for (const auto &kv : opt.overrides) {
		const auto eq = kv.find('=');
		if (eq == std::string::npos) throw pcam::config_error("expected key=value, got '" + kv + "'", kv);
		pcam::set_config_value(cfg, pcam::detail::trim(kv.substr(0, eq)), pcam::detail::trim(kv.substr(eq + 1)));
	}
	if (opt.seed) cfg.seed = *opt.seed;
	if (opt.out) cfg.out_dir = *opt.out;
	if (task) cfg.task = *task;
	pcam::validate_config(cfg);
	return cfg;
}

// With select_best only the winning row is printed; metrics.csv always has every row.
void print_rows(const pcam::RunArtifacts &art, bool best_only)
{
	std::cout << pcam::metrics_header() << '\n';
	if (best_only) {
		std::cout << pcam::format_row(art.rows[art.best]) << '\n';
	} else {
		for (const auto &r : art.rows) std::cout << pcam::format_row(r) << '\n';
	}
	if (art.rows.size() > 1)
		std::cout << "best: row " << art.best << ": " << pcam::format_row(art.rows[art.best]) << '\n';
	std::cout << "metrics: " << art.metrics_path << '\n';
	for (const auto &g : art.grids) std::cout << "grid: " << g << '\n';
	for (const auto &c : art.checkpoints) std::cout << "checkpoint: " << c << '\n';
}

int run_task(const Options &opt, pcam::Task task)
{
	const auto cfg = build_config(opt, task);
	const auto art = pcam::run_experiment(cfg, opt.quiet ? nullptr : &std::cerr);
	print_rows(art, cfg.select_best);
	if (task == pcam::Task::gradcheck)
		for (const auto &r : art.rows)
			if (r.retrieved != r.total) return exit_gradcheck;
	return 0;
}

int run_train(const Options &opt)
{
	auto cfg = build_config(opt, std::nullopt);
	std::filesystem::create_directories(cfg.out_dir);
	const auto data = pcam::prepare_data(cfg);
	pcam::TrainTrace trace;
	cfg.checkpoint.clear();
	const auto model = pcam::train_pcn(cfg, data.set, &trace, opt.quiet ? nullptr : &std::cerr);
	const std::string model_path = cfg.out_dir + "/pcn.pcam";
	pcam::save_model(model, model_path);
	const std::string trace_path = cfg.out_dir + "/train_trace.csv";
	std::ofstream out(trace_path);
	if (!out) throw pcam::io_error("cannot write", trace_path);
	out << "epoch,mean_energy\n";
	out.precision(10);
	for (std::size_t e = 0; e < trace.epoch_energy.size(); ++e) out << e << ',' << trace.epoch_energy[e] << '\n';
	std::cout << "epochs " << trace.epoch_energy.size() << ", final mean energy " << trace.final_energy()
	          << (trace.converged ? " (converged)" : "") << '\n'
	          << "checkpoint: " << model_path << '\n'
	          << "trace: " << trace_path << '\n';
	return 0;
}

int run_grid(const std::vector<std::string> &rows, const std::string &output, bool diff)
{
	std::vector<std::vector<pcam::ImageTensor>> grid;
	for (const auto &row : rows) {
		std::vector<pcam::ImageTensor> tiles;
		for (const auto &p : pcam::detail::split_list(row)) tiles.push_back(pcam::read_tensor(p));
		grid.push_back(std::move(tiles));
	}
	if (diff) {
		if (grid.size() < 2) throw pcam::invalid_input("--diff needs at least two rows");
		if (grid[0].size() != grid[1].size()) throw pcam::dimension_error("grid rows differ in length");
		std::vector<pcam::ImageTensor> d;
		for (std::size_t i = 0; i < grid[0].size(); ++i) d.push_back(pcam::difference_image(grid[0][i], grid[1][i]));
		grid.push_back(std::move(d));
	}
	pcam::emit_grid(grid, output);
	std::cout << "grid: " << output << '\n';
	return 0;
}

}  // namespace

int main(int argc, char **argv)
{
	CLI::App app{"Predictive coding associative memories"};
	app.require_subcommand(1);
	app.fallthrough();
	Options opt;
	app.add_option("--config", opt.config_path, "key = value config file");
	app.add_option("--seed", opt.seed, "seed for every random stream");
	app.add_option("--out", opt.out, "output directory");
	app.add_option("--set", opt.overrides, "override one config key (key=value), repeatable");
	app.add_flag("-q,--quiet", opt.quiet, "no progress on stderr");

	auto *train = app.add_subcommand("train", "store the configured corpus in a PCN");
	struct Sub {
		const char *name;
		const char *help;
		pcam::Task task;
	};
	const Sub subs[] = {
	    {"denoise", "retrieve from Gaussian-noise queries", pcam::Task::denoise},
	    {"complete", "retrieve from partially masked queries", pcam::Task::complete},
	    {"hetero", "recover one modality of captioned images from the other", pcam::Task::hetero},
	    {"mhn", "modern Hopfield baseline over the beta/copies grid", pcam::Task::mhn_compare},
	    {"ae", "autoencoder baseline", pcam::Task::ae_compare},
	    {"gradcheck", "finite-difference check of the update rules", pcam::Task::gradcheck},
	};
	std::vector<std::pair<CLI::App *, pcam::Task>> task_cmds;
	for (const auto &s : subs) task_cmds.emplace_back(app.add_subcommand(s.name, s.help), s.task);

	auto *grid = app.add_subcommand("grid", "tile images into one PPM");
	std::vector<std::string> grid_rows;
	std::string grid_output = "grid.ppm";
	bool grid_diff = false;
	grid->add_option("rows", grid_rows, "one comma-separated list of image paths per row")->required();
	grid->add_option("-o,--output", grid_output, "output PPM path");
	grid->add_flag("--diff", grid_diff, "append |row1 - row2| rescaled to [0,1]");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : exit_config;
	}

	try {
		if (train->parsed()) return run_train(opt);
		if (grid->parsed()) return run_grid(grid_rows, grid_output, grid_diff);
		for (const auto &[cmd, task] : task_cmds)
			if (cmd->parsed()) return run_task(opt, task);
	} catch (const pcam::config_error &e) {
		std::cerr << "config error: " << e.what() << '\n';
		return exit_config;
	} catch (const pcam::io_error &e) {
		std::cerr << "I/O error: " << e.what() << '\n';
		return exit_io;
	} catch (const pcam::format_error &e) {
		std::cerr << "format error: " << e.what() << '\n';
		return exit_io;
	} catch (const std::filesystem::filesystem_error &e) {
		std::cerr << "I/O error: " << e.what() << '\n';
		return exit_io;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
	return 1;
}
