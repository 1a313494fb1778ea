#pragma once

#include <optional>
#include <string>
#include <vector>

#include "missinglens/gam.hpp"
#include "missinglens/missingness.hpp"

namespace missinglens {

struct SvgOptions {
  int width = 720;
  int height = 420;
  std::string title;
  std::optional<double> mean_line;        // vertical rule (audits)
  std::vector<int> highlight_bins;        // value-bin indices drawn highlighted
};

// Step-function shape plot with a bin-count density strip; the missing bin is
// rendered as a detached marked segment on the left.
std::string shape_svg(const ShapeFunction& shape, const SvgOptions& options = {});

// Observed and imputed curves of a separated shape on one axis.
std::string separated_shape_svg(const SeparatedShapeCurves& curves, const std::string& title = {});

}  // namespace missinglens
