#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace amqc {

// Defect classes; ids match the evaluation tables throughout.
enum class DefectClass : uint8_t { crack = 0, pinhole = 1, hole = 2, spatter = 3 };
inline constexpr int kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"crack", "pinhole",
                                                                          "hole", "spatter"};

std::string_view class_name(int class_id);
int class_id_from_name(std::string_view name);  // format error on unknown name

// One labeled defect. The bounding box is half-open in pixel coordinates:
// xmin <= x < xmax, ymin <= y < ymax, with xmax <= image_width and
// ymax <= image_height.
struct Annotation {
  int class_id = 0;
  int xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  int image_width = 0, image_height = 0;

  bool operator==(const Annotation&) const = default;
};

// Throws invalid_argument when an invariant is violated.
void validate_annotation(const Annotation& a);

// Pascal-VOC-dialect XML with exactly one object per file.
std::string annotation_to_xml(const Annotation& a, const std::string& image_name);
// Returns the annotation and the embedded filename.
Annotation annotation_from_xml(std::string_view xml, std::string* image_name = nullptr);

}  // namespace amqc
