#include "amqc/annotation.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <vector>

#include "amqc/error.hpp"

namespace amqc {

std::string_view class_name(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses)
    fail(ErrorKind::invalid_argument, "unknown class id " + std::to_string(class_id));
  return kClassNames[static_cast<size_t>(class_id)];
}

int class_id_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<size_t>(i)] == name) return i;
  fail(ErrorKind::format, "unknown class name in <name>: '" + std::string(name) + "'");
}

void validate_annotation(const Annotation& a) {
  if (a.class_id < 0 || a.class_id >= kNumClasses)
    fail(ErrorKind::invalid_argument, "annotation class_id out of range");
  if (a.image_width <= 0 || a.image_height <= 0)
    fail(ErrorKind::invalid_argument, "annotation image size must be positive");
  if (!(0 <= a.xmin && a.xmin < a.xmax && a.xmax <= a.image_width))
    fail(ErrorKind::invalid_argument, "annotation bbox x range invalid");
  if (!(0 <= a.ymin && a.ymin < a.ymax && a.ymax <= a.image_height))
    fail(ErrorKind::invalid_argument, "annotation bbox y range invalid");
}

std::string annotation_to_xml(const Annotation& a, const std::string& image_name) {
  validate_annotation(a);
  std::string s;
  s += "<annotation>\n";
  s += "  <filename>" + image_name + "</filename>\n";
  s += "  <size>\n";
  s += "    <width>" + std::to_string(a.image_width) + "</width>\n";
  s += "    <height>" + std::to_string(a.image_height) + "</height>\n";
  s += "    <depth>1</depth>\n";
  s += "  </size>\n";
  s += "  <object>\n";
  s += "    <name>" + std::string(class_name(a.class_id)) + "</name>\n";
  s += "    <bndbox>\n";
  s += "      <xmin>" + std::to_string(a.xmin) + "</xmin>\n";
  s += "      <ymin>" + std::to_string(a.ymin) + "</ymin>\n";
  s += "      <xmax>" + std::to_string(a.xmax) + "</xmax>\n";
  s += "      <ymax>" + std::to_string(a.ymax) + "</ymax>\n";
  s += "    </bndbox>\n";
  s += "  </object>\n";
  s += "</annotation>\n";
  return s;
}

namespace {

// Minimal element-only XML reader for the annotation dialect: no attributes,
// no CDATA, no entities beyond plain text.
struct XmlNode {
  std::string name;
  std::string text;
  std::vector<std::unique_ptr<XmlNode>> children;

  const XmlNode* child(std::string_view n) const {
    for (const auto& c : children)
      if (c->name == n) return c.get();
    return nullptr;
  }
};

class XmlParser {
public:
  explicit XmlParser(std::string_view src) : src_(src) {}

  std::unique_ptr<XmlNode> parse() {
    skip_ws_and_decl();
    auto root = parse_element();
    skip_ws();
    if (pos_ != src_.size()) fail(ErrorKind::format, "XML: trailing content after root element");
    return root;
  }

private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  void skip_ws_and_decl() {
    skip_ws();
    if (src_.substr(pos_).starts_with("<?")) {
      const size_t end = src_.find("?>", pos_);
      if (end == std::string_view::npos) fail(ErrorKind::format, "XML: unterminated declaration");
      pos_ = end + 2;
      skip_ws();
    }
  }

  std::string read_tag_name() {
    const size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail(ErrorKind::format, "XML: empty tag name");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::unique_ptr<XmlNode> parse_element() {
    if (pos_ >= src_.size() || src_[pos_] != '<')
      fail(ErrorKind::format, "XML: expected element start");
    ++pos_;
    auto node = std::make_unique<XmlNode>();
    node->name = read_tag_name();
    skip_ws();
    if (pos_ >= src_.size() || src_[pos_] != '>')
      fail(ErrorKind::format, "XML: malformed start tag <" + node->name + ">");
    ++pos_;
    // Content: interleaved text and child elements until the closing tag.
    while (true) {
      if (pos_ >= src_.size())
        fail(ErrorKind::format, "XML: unterminated element <" + node->name + ">");
      if (src_[pos_] == '<') {
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
          pos_ += 2;
          const std::string closing = read_tag_name();
          if (closing != node->name)
            fail(ErrorKind::format,
                 "XML: mismatched closing tag </" + closing + "> for <" + node->name + ">");
          skip_ws();
          if (pos_ >= src_.size() || src_[pos_] != '>')
            fail(ErrorKind::format, "XML: malformed closing tag </" + closing + ">");
          ++pos_;
          return node;
        }
        node->children.push_back(parse_element());
      } else {
        node->text += src_[pos_];
        ++pos_;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
};

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const XmlNode& require_child(const XmlNode& parent, std::string_view name) {
  const XmlNode* c = parent.child(name);
  if (!c)
    fail(ErrorKind::format,
         "XML: missing <" + std::string(name) + "> inside <" + parent.name + ">");
  return *c;
}

int int_text(const XmlNode& node) {
  const std::string_view t = trimmed(node.text);
  int v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size())
    fail(ErrorKind::format, "XML: <" + node.name + "> is not an integer: '" + std::string(t) + "'");
  return v;
}

}  // namespace

Annotation annotation_from_xml(std::string_view xml, std::string* image_name) {
  XmlParser parser(xml);
  const auto root = parser.parse();
  if (root->name != "annotation") fail(ErrorKind::format, "XML: root element must be <annotation>");

  const XmlNode& size = require_child(*root, "size");
  const XmlNode& object = require_child(*root, "object");
  const XmlNode& bndbox = require_child(object, "bndbox");

  Annotation a;
  a.image_width = int_text(require_child(size, "width"));
  a.image_height = int_text(require_child(size, "height"));
  const int depth = int_text(require_child(size, "depth"));
  if (depth != 1) fail(ErrorKind::format, "XML: <depth> must be 1 for grayscale");
  a.class_id = class_id_from_name(trimmed(require_child(object, "name").text));
  a.xmin = int_text(require_child(bndbox, "xmin"));
  a.ymin = int_text(require_child(bndbox, "ymin"));
  a.xmax = int_text(require_child(bndbox, "xmax"));
  a.ymax = int_text(require_child(bndbox, "ymax"));

  if (a.xmax <= a.xmin) fail(ErrorKind::format, "XML: <xmax> must exceed <xmin>");
  if (a.ymax <= a.ymin) fail(ErrorKind::format, "XML: <ymax> must exceed <ymin>");
  if (a.xmin < 0 || a.xmax > a.image_width)
    fail(ErrorKind::format, "XML: <bndbox> x range outside image bounds");
  if (a.ymin < 0 || a.ymax > a.image_height)
    fail(ErrorKind::format, "XML: <bndbox> y range outside image bounds");

  if (image_name) *image_name = std::string(trimmed(require_child(*root, "filename").text));
  return a;
}

}  // namespace amqc
