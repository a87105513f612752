#pragma once

#include <string>
#include <vector>

#include "data.hpp"

namespace pcam {

/// |a - b| rescaled so its largest entry is 1 (all zero when a == b).
inline ImageTensor difference_image(const ImageTensor &a, const ImageTensor &b)
{
	if (!(a.shape == b.shape)) throw dimension_error("difference of differently shaped images");
	Vector diff = (a.pixels - b.pixels).cwiseAbs();
	const double peak = diff.size() ? diff.maxCoeff() : 0.0;
	if (peak > 0.0) diff /= peak;
	return ImageTensor(a.shape, diff);
}

/**
 * Tiles `rows` top to bottom (and each row left to right) into one RGB
 * image, with 2-pixel white separators. Single-channel tiles are shown grey.
 */
inline ImageTensor tile_grid(const std::vector<std::vector<ImageTensor>> &rows)
{
	constexpr Index gap = 2;
	if (rows.empty() || rows.front().empty()) throw dimension_error("empty image grid");
	const TensorShape s = rows.front().front().shape;
	const std::size_t cols = rows.front().size();
	for (const auto &row : rows) {
		if (row.size() != cols) throw dimension_error("grid rows differ in length");
		for (const auto &t : row)
			if (!(t.shape == s)) throw dimension_error("grid tiles differ in shape");
	}
	if (s.channels != 1 && s.channels != 3)
		throw dimension_error("grid tiles must have 1 or 3 channels");
	const Index R = Index(rows.size()), C = Index(cols);
	TensorShape out_shape{3, R * s.height + (R - 1) * gap, C * s.width + (C - 1) * gap};
	ImageTensor out(out_shape);
	out.pixels.setOnes();
	for (Index r = 0; r < R; ++r)
		for (Index c = 0; c < C; ++c) {
			const ImageTensor &t = rows[std::size_t(r)][std::size_t(c)];
			const Index oy = r * (s.height + gap), ox = c * (s.width + gap);
			for (Index ch = 0; ch < 3; ++ch)
				for (Index y = 0; y < s.height; ++y)
					for (Index x = 0; x < s.width; ++x)
						out.at(ch, oy + y, ox + x) = t.at(s.channels == 1 ? 0 : ch, y, x);
		}
	return out;
}

inline void emit_grid(const std::vector<std::vector<ImageTensor>> &rows, const std::string &path)
{
	write_tensor(tile_grid(rows), path, TensorFormat::ppm);
}

}  // namespace pcam
