#pragma once

#include <optional>
#include <string>

#include "pcn.hpp"

namespace pcam {

/// Half-open index range [begin, end) over the sensory vector.
struct Span {
	Index begin = 0;
	Index end = 0;

	Index size() const { return end - begin; }
	bool contains(Index i) const { return i >= begin && i < end; }
	bool operator==(const Span &) const = default;
};

/// Image and caption spans of a multi-modal exemplar.
struct ModalityLayout {
	Span image;
	Span caption;
};

/**
 * Stored data points, one column per item, every entry in [0,1].
 */
struct ExemplarSet {
	Matrix items;  // d x N
	std::optional<ModalityLayout> layout;

	Index dim() const { return items.rows(); }
	Index size() const { return items.cols(); }

	void validate() const
	{
		if (items.size() > 0 && (items.minCoeff() < 0.0 || items.maxCoeff() > 1.0))
			throw invalid_input("exemplar entries must lie in [0,1]");
		if (!layout) return;
		const auto [a, b] = *layout;
		const Span &lo = a.begin <= b.begin ? a : b;
		const Span &hi = a.begin <= b.begin ? b : a;
		if (lo.begin != 0 || lo.end != hi.begin || hi.end != dim() || lo.size() <= 0 ||
		    hi.size() <= 0)
			throw invalid_input("modality spans must be disjoint and cover the vector");
	}
};

}  // namespace pcam
