#pragma once

/// Minimal DOM parser for POM-style XML. Elements, attributes, character
/// data, comments, CDATA and the XML declaration are handled; namespace
/// prefixes on element names are stripped. Every element records the byte
/// range of its inner content so callers can do surgical in-place rewrites.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "ranger/error.hpp"

namespace ranger::xml {

struct Node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Node> children;
    std::string text; // concatenated direct character data, entities decoded
    size_t inner_begin = 0;
    size_t inner_end = 0;

    const Node* child(std::string_view n) const {
        for (const auto& c : children)
            if (c.name == n) return &c;
        return nullptr;
    }

    std::vector<const Node*> children_named(std::string_view n) const {
        std::vector<const Node*> out;
        for (const auto& c : children)
            if (c.name == n) out.push_back(&c);
        return out;
    }

    std::string trimmed_text() const {
        size_t b = 0, e = text.size();
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        return text.substr(b, e - b);
    }
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view input) : in_(input) {}

    Node parse_document() {
        skip_misc();
        if (pos_ >= in_.size() || in_[pos_] != '<') fail("expected root element");
        Node root = parse_element();
        skip_misc();
        if (pos_ < in_.size()) fail("trailing content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        size_t line = 1;
        for (size_t i = 0; i < pos_ && i < in_.size(); ++i)
            if (in_[i] == '\n') ++line;
        throw Error(ErrorCode::XmlError, what + " at line " + std::to_string(line));
    }

    bool starts_with(std::string_view prefix) const {
        return in_.substr(pos_).substr(0, prefix.size()) == prefix;
    }

    void skip_ws() {
        while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) ++pos_;
    }

    // whitespace, comments, processing instructions, doctype
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<!--")) {
                auto end = in_.find("-->", pos_ + 4);
                if (end == std::string_view::npos) fail("unterminated comment");
                pos_ = end + 3;
            } else if (starts_with("<?")) {
                auto end = in_.find("?>", pos_ + 2);
                if (end == std::string_view::npos) fail("unterminated processing instruction");
                pos_ = end + 2;
            } else if (starts_with("<!DOCTYPE")) {
                auto end = in_.find('>', pos_);
                if (end == std::string_view::npos) fail("unterminated doctype");
                pos_ = end + 1;
            } else {
                return;
            }
        }
    }

    static std::string strip_prefix(std::string name) {
        auto colon = name.find(':');
        return colon == std::string::npos ? name : name.substr(colon + 1);
    }

    std::string read_name() {
        size_t start = pos_;
        while (pos_ < in_.size()) {
            char c = in_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
                c == ':')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected name");
        return std::string(in_.substr(start, pos_ - start));
    }

    void decode_entity(std::string& out) {
        // pos_ is at '&'
        auto end = in_.find(';', pos_);
        if (end == std::string_view::npos || end - pos_ > 12) {
            out += '&'; // tolerate bare ampersands
            ++pos_;
            return;
        }
        std::string_view ent = in_.substr(pos_ + 1, end - pos_ - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (ent.size() >= 2 && ent[0] == '#') {
            long code = 0;
            try {
                code = ent[1] == 'x' || ent[1] == 'X'
                           ? std::stol(std::string(ent.substr(2)), nullptr, 16)
                           : std::stol(std::string(ent.substr(1)));
            } catch (...) {
                fail("bad character reference");
            }
            if (code < 0x80) out += static_cast<char>(code);
            else out += '?'; // non-ASCII references are not needed for POMs
        } else {
            out += '&';
            out += ent;
            out += ';';
        }
        pos_ = end + 1;
    }

    std::string read_attribute_value() {
        if (pos_ >= in_.size() || (in_[pos_] != '"' && in_[pos_] != '\'')) fail("expected quote");
        char quote = in_[pos_++];
        std::string out;
        while (pos_ < in_.size() && in_[pos_] != quote) {
            if (in_[pos_] == '&') decode_entity(out);
            else out += in_[pos_++];
        }
        if (pos_ >= in_.size()) fail("unterminated attribute value");
        ++pos_; // closing quote
        return out;
    }

    Node parse_element() {
        ++pos_; // '<'
        Node node;
        std::string raw_name = read_name();
        node.name = strip_prefix(raw_name);
        for (;;) {
            skip_ws();
            if (pos_ >= in_.size()) fail("unterminated start tag");
            if (starts_with("/>")) {
                pos_ += 2;
                node.inner_begin = node.inner_end = pos_;
                return node;
            }
            if (in_[pos_] == '>') {
                ++pos_;
                break;
            }
            std::string attr = read_name();
            skip_ws();
            if (pos_ >= in_.size() || in_[pos_] != '=') fail("expected '=' in attribute");
            ++pos_;
            skip_ws();
            node.attributes.emplace_back(strip_prefix(std::move(attr)), read_attribute_value());
        }

        node.inner_begin = pos_;
        for (;;) {
            if (pos_ >= in_.size()) fail("unterminated element <" + raw_name + ">");
            if (in_[pos_] == '<') {
                if (starts_with("<!--")) {
                    auto end = in_.find("-->", pos_ + 4);
                    if (end == std::string_view::npos) fail("unterminated comment");
                    pos_ = end + 3;
                } else if (starts_with("<![CDATA[")) {
                    auto end = in_.find("]]>", pos_ + 9);
                    if (end == std::string_view::npos) fail("unterminated CDATA section");
                    node.text.append(in_.substr(pos_ + 9, end - pos_ - 9));
                    pos_ = end + 3;
                } else if (starts_with("</")) {
                    node.inner_end = pos_;
                    pos_ += 2;
                    std::string close = read_name();
                    if (close != raw_name)
                        fail("mismatched close tag </" + close + "> for <" + raw_name + ">");
                    skip_ws();
                    if (pos_ >= in_.size() || in_[pos_] != '>') fail("malformed close tag");
                    ++pos_;
                    return node;
                } else {
                    node.children.push_back(parse_element());
                }
            } else if (in_[pos_] == '&') {
                decode_entity(node.text);
            } else {
                node.text += in_[pos_++];
            }
        }
    }

    std::string_view in_;
    size_t pos_ = 0;
};

} // namespace detail

inline Node parse(std::string_view input) { return detail::Parser(input).parse_document(); }

} // namespace ranger::xml
