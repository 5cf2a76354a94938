#include "comodel/dsl.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

namespace comodel::dsl {
namespace {

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

class LineParser {
public:
    LineParser(std::string_view line, int line_no) : s_(line), line_(line_no) {}

    // Returns nullopt for blank and comment-only lines.
    std::optional<std::pair<Statement, SourceSpan>> statement() {
        skip_ws();
        if (at_end()) return std::nullopt;
        const int first = column();

        Statement st;
        const std::size_t verb_pos = pos_;
        st.verb = identifier("verb");
        const auto& vs = verbs();
        if (std::find(vs.begin(), vs.end(), st.verb) == vs.end()) {
            pos_ = verb_pos;
            fail("verb (create, modify, material, transform, hide, show, duplicate)");
        }

        while (true) {
            skip_ws();
            if (at_end()) {
                if (st.args.empty()) fail("key");
                break;
            }
            const std::size_t key_pos = pos_;
            std::string key = identifier("key");
            if (st.find(key) != nullptr) {
                pos_ = key_pos;
                fail("unique key");
            }
            skip_ws();
            expect('=', "'='");
            skip_ws();
            st.args.push_back({std::move(key), value()});
        }
        return std::make_pair(std::move(st), SourceSpan{line_, first, last_column_});
    }

private:
    int column() const { return static_cast<int>(pos_) + 1; }
    bool at_end() const { return pos_ >= s_.size() || s_[pos_] == '#'; }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }

    std::string found() const {
        if (at_end()) return "end of line";
        const char c = s_[pos_];
        if (c == '"') return "string";
        std::size_t end = pos_ + 1;
        if (ident_char(c) || c == '.' || c == '-' || c == '+') {
            while (end < s_.size() && (ident_char(s_[end]) || s_[end] == '.')) ++end;
        }
        return "'" + std::string(s_.substr(pos_, end - pos_)) + "'";
    }

    [[noreturn]] void fail(const std::string& expected) const {
        throw ParseError(line_, column(), expected, found());
    }

    void expect(char c, const char* what) {
        if (at_end() || s_[pos_] != c) fail(what);
        ++pos_;
        last_column_ = column() - 1;
    }

    std::string identifier(const char* what) {
        if (at_end() || !ident_start(s_[pos_])) fail(what);
        const std::size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        last_column_ = column() - 1;
        return std::string(s_.substr(start, pos_ - start));
    }

    // A value must be followed by whitespace, a comment, end of line, or (inside vectors) ',' / ')'.
    void require_delimiter() {
        if (pos_ >= s_.size()) return;
        const char c = s_[pos_];
        if (c == ' ' || c == '\t' || c == '\r' || c == '#' || c == ',' || c == ')') return;
        fail("whitespace or end of value");
    }

    double number() {
        if (at_end()) fail("number");
        const std::size_t start = pos_;
        std::size_t p = pos_;
        if (s_[p] == '+' || s_[p] == '-') ++p;
        const std::size_t mantissa = p;
        while (p < s_.size() && digit(s_[p])) ++p;
        bool any_digits = p > mantissa;
        if (p < s_.size() && s_[p] == '.') {
            ++p;
            const std::size_t frac = p;
            while (p < s_.size() && digit(s_[p])) ++p;
            any_digits = any_digits || p > frac;
        }
        if (!any_digits) fail("number");
        if (p < s_.size() && (s_[p] == 'e' || s_[p] == 'E')) {
            std::size_t q = p + 1;
            if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
            const std::size_t exp_digits = q;
            while (q < s_.size() && digit(s_[q])) ++q;
            if (q > exp_digits) p = q;
        }
        std::size_t from = start;
        if (s_[from] == '+') ++from;
        double value = 0.0;
        const auto [end, ec] = std::from_chars(s_.data() + from, s_.data() + p, value);
        if (ec != std::errc{} || end != s_.data() + p || !std::isfinite(value)) fail("finite number");
        pos_ = p;
        last_column_ = column() - 1;
        require_delimiter();
        return value;
    }

    std::string quoted() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (pos_ >= s_.size()) fail("closing quote");
            const char c = s_[pos_];
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ + 1 >= s_.size()) {
                    ++pos_;
                    fail("escape character");
                }
                const char e = s_[pos_ + 1];
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    default: ++pos_; fail("escape character (\\\" \\\\ \\n \\t)");
                }
                pos_ += 2;
                continue;
            }
            out += c;
            ++pos_;
        }
        ++pos_;
        last_column_ = column() - 1;
        require_delimiter();
        return out;
    }

    ArgValue value() {
        if (at_end()) fail("value");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Vec3 v;
            for (int i = 0; i < 3; ++i) {
                skip_ws();
                v[i] = number();
                skip_ws();
                expect(i < 2 ? ',' : ')', i < 2 ? "','" : "')'");
            }
            require_delimiter();
            return v;
        }
        if (c == '"') return quoted();
        if (digit(c) || c == '-' || c == '+' || c == '.') return number();
        if (ident_start(c)) {
            std::string id = identifier("value");
            require_delimiter();
            if (id == "true") return true;
            if (id == "false") return false;
            return Ident{std::move(id)};
        }
        fail("value");
    }

    std::string_view s_;
    int line_;
    std::size_t pos_ = 0;
    int last_column_ = 0;
};

std::string escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

// ---------------------------------------------------------------------------------------------
// Execution

struct Failure {
    std::string code;
    std::string message;
};

[[noreturn]] void fail(std::string code, std::string message) { throw Failure{std::move(code), std::move(message)}; }

const std::array<std::string_view, 10> kShapeKeys = {"size", "segments", "rings", "subdivisions", "radius",
                                                     "depth", "major_segments", "minor_segments",
                                                     "major_radius", "minor_radius"};

bool is_shape_key(std::string_view key) {
    return std::find(kShapeKeys.begin(), kShapeKeys.end(), key) != kShapeKeys.end();
}

void check_keys(const Statement& st, std::initializer_list<std::string_view> allowed, bool shape_keys) {
    for (const auto& arg : st.args) {
        const bool ok = std::find(allowed.begin(), allowed.end(), arg.key) != allowed.end() ||
                        (shape_keys && is_shape_key(arg.key));
        if (!ok) fail("unknown_arg", "'" + st.verb + "' does not take argument '" + arg.key + "'");
    }
}

const ArgValue& require_arg(const Statement& st, std::string_view key) {
    const ArgValue* v = st.find(key);
    if (!v) fail("missing_arg", "'" + st.verb + "' requires argument '" + std::string(key) + "'");
    return *v;
}

[[noreturn]] void wrong_type(std::string_view key, const char* expected) {
    fail("invalid_arg", "argument '" + std::string(key) + "' must be " + expected);
}

std::string as_name(const ArgValue& v, std::string_view key) {
    if (const auto* id = std::get_if<Ident>(&v)) return id->name;
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    wrong_type(key, "a name");
}

double as_number(const ArgValue& v, std::string_view key) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    wrong_type(key, "a number");
}

Vec3 as_vec(const ArgValue& v, std::string_view key) {
    if (const auto* p = std::get_if<Vec3>(&v)) return *p;
    wrong_type(key, "a vector (x,y,z)");
}

Vec3 as_scale(const ArgValue& v, std::string_view key) {
    if (const auto* d = std::get_if<double>(&v)) return Vec3::Constant(*d);
    if (const auto* p = std::get_if<Vec3>(&v)) return *p;
    wrong_type(key, "a number or vector");
}

std::optional<std::string> optional_name(const Statement& st, std::string_view key) {
    const ArgValue* v = st.find(key);
    if (!v) return std::nullopt;
    return as_name(*v, key);
}

const SceneObject& existing(const Scene& scene, const std::string& name) {
    const SceneObject* obj = scene.find(name);
    if (!obj) fail("unknown_object", "unknown object '" + name + "'");
    return *obj;
}

void apply_shape_args(const Statement& st, PrimitiveShape& shape) {
    for (const auto& arg : st.args) {
        if (!is_shape_key(arg.key)) continue;
        set_param(shape, arg.key, as_number(arg.value, arg.key));
    }
}

void apply_array_args(const Statement& st, PrimitiveSpec& spec) {
    const ArgValue* count = st.find("array_count");
    const ArgValue* offset = st.find("array_offset");
    if (!count && !offset) return;
    ArrayModifier mod = spec.array.value_or(ArrayModifier{});
    if (count) {
        const double c = as_number(*count, "array_count");
        if (std::trunc(c) != c || c < 1 || c > 1e6) {
            throw SceneError(SceneErrc::invalid_primitive_params, "array count must be an integer >= 1");
        }
        mod.count = static_cast<int>(c);
    }
    if (offset) mod.offset = as_vec(*offset, "array_offset");
    spec.array = mod;
}

std::optional<MaterialSpec> material_args(const Statement& st, const SceneObject* current) {
    const ArgValue* color = st.find("color");
    const ArgValue* label = st.find("label");
    if (!color && !label) return std::nullopt;
    MaterialSpec m = current ? current->material : MaterialSpec{};
    if (color) m.base_color = as_vec(*color, "color");
    if (label) m.name = as_name(*label, "label");
    return m;
}

Vec3 degrees_vec(const Vec3& deg) { return deg.unaryExpr([](double d) { return degrees_to_radians(d); }); }

std::string run_create(Scene& scene, const Statement& st, bool modify) {
    check_keys(st, {"name", "kind", "at", "rotate", "scale", "color", "label", "array_count", "array_offset"}, true);
    const std::string name = as_name(require_arg(st, "name"), "name");
    const SceneObject* current = scene.find(name);
    if (modify && !current) existing(scene, name);

    PrimitiveSpec spec;
    Transform transform;
    if (modify) {
        spec = current->primitive;
        transform = visible_transform(*current);
    }
    const ArgValue* kind_arg = modify ? st.find("kind") : &require_arg(st, "kind");
    if (kind_arg) {
        const std::string kind = as_name(*kind_arg, "kind");
        auto shape = shape_for_kind(kind);
        if (!shape) throw SceneError(SceneErrc::invalid_primitive_params, "unknown primitive kind '" + kind + "'");
        if (!modify || shape->index() != spec.shape.index()) spec.shape = *shape;
    }
    apply_shape_args(st, spec.shape);
    apply_array_args(st, spec);

    if (const ArgValue* at = st.find("at")) transform.translation = as_vec(*at, "at");
    if (const ArgValue* rot = st.find("rotate")) transform.rotation_euler = degrees_vec(as_vec(*rot, "rotate"));
    if (const ArgValue* sc = st.find("scale")) transform.scale = as_scale(*sc, "scale");

    upsert_object(scene, name, spec, transform, material_args(st, current));
    return name;
}

std::string run_material(Scene& scene, const Statement& st) {
    check_keys(st, {"name", "color", "label"}, false);
    const std::string name = as_name(require_arg(st, "name"), "name");
    MaterialSpec m;
    m.base_color = as_vec(require_arg(st, "color"), "color");
    if (auto label = optional_name(st, "label")) m.name = *label;
    const SceneObject& obj = existing(scene, name);
    upsert_object(scene, name, obj.primitive, visible_transform(obj), m);
    return name;
}

std::string run_transform(Scene& scene, const Statement& st) {
    check_keys(st, {"name", "translate", "rotate_x", "rotate_y", "rotate_z", "scale"}, false);
    const std::string name = as_name(require_arg(st, "name"), "name");
    const SceneObject& obj = existing(scene, name);
    Transform t = visible_transform(obj);
    if (const ArgValue* v = st.find("translate")) t.translation += as_vec(*v, "translate");
    const std::array<const char*, 3> axes = {"rotate_x", "rotate_y", "rotate_z"};
    for (int i = 0; i < 3; ++i) {
        if (const ArgValue* v = st.find(axes[i])) t.rotation_euler[i] += degrees_to_radians(as_number(*v, axes[i]));
    }
    if (const ArgValue* v = st.find("scale")) t.scale = t.scale.cwiseProduct(as_scale(*v, "scale"));
    const PrimitiveSpec primitive = obj.primitive;
    upsert_object(scene, name, primitive, t);
    return name;
}

std::string run_visibility(Scene& scene, const Statement& st, bool hide) {
    check_keys(st, {"name"}, false);
    const std::string name = as_name(require_arg(st, "name"), "name");
    existing(scene, name);
    if (hide) {
        hide_object(scene, name);
    } else {
        show_object(scene, name);
    }
    return name;
}

// The copy is always visible, placed at the source's pre-hide position plus offset.
std::string run_duplicate(Scene& scene, const Statement& st) {
    check_keys(st, {"name", "new_name", "offset"}, false);
    const std::string name = as_name(require_arg(st, "name"), "name");
    const std::string new_name = as_name(require_arg(st, "new_name"), "new_name");
    const Vec3 offset = as_vec(require_arg(st, "offset"), "offset");
    const SceneObject source = existing(scene, name);
    Transform t = visible_transform(source);
    t.translation += offset;
    upsert_object(scene, new_name, source.primitive, t, source.material);
    return new_name;
}

std::string run_statement(Scene& scene, const Statement& st) {
    if (st.verb == "create") return run_create(scene, st, false);
    if (st.verb == "modify") return run_create(scene, st, true);
    if (st.verb == "material") return run_material(scene, st);
    if (st.verb == "transform") return run_transform(scene, st);
    if (st.verb == "hide") return run_visibility(scene, st, true);
    if (st.verb == "show") return run_visibility(scene, st, false);
    if (st.verb == "duplicate") return run_duplicate(scene, st);
    fail("unknown_verb", "unknown verb '" + st.verb + "'");
}

}  // namespace

bool Arg::operator==(const Arg& other) const { return key == other.key && value == other.value; }

const ArgValue* Statement::find(std::string_view key) const {
    for (const auto& a : args) {
        if (a.key == key) return &a.value;
    }
    return nullptr;
}

bool same_structure(const Script& a, const Script& b) { return a.statements == b.statements; }

const std::vector<std::string_view>& verbs() {
    static const std::vector<std::string_view> v = {"create", "modify", "material", "transform",
                                                    "hide",   "show",   "duplicate"};
    return v;
}

ParseError::ParseError(int line, int column, std::string expected, std::string found)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": expected " +
                         expected + ", found " + found),
      line_(line),
      column_(column),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

Script parse(std::string_view text) {
    Script script;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        ++line_no;
        LineParser lp(text.substr(start, end - start), line_no);
        if (auto parsed = lp.statement()) {
            script.statements.push_back(std::move(parsed->first));
            script.source_spans.push_back(parsed->second);
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return script;
}

std::string format_value(const ArgValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_real(v);
            } else if constexpr (std::is_same_v<T, Ident>) {
                return v.name;
            } else if constexpr (std::is_same_v<T, std::string>) {
                return escape(v);
            } else if constexpr (std::is_same_v<T, Vec3>) {
                return "(" + format_real(v.x()) + "," + format_real(v.y()) + "," + format_real(v.z()) + ")";
            } else {
                return v ? "true" : "false";
            }
        },
        value);
}

std::string format(const Statement& st) {
    std::string out = st.verb;
    for (const auto& a : st.args) out += " " + a.key + "=" + format_value(a.value);
    return out;
}

std::string format(const Script& script) {
    std::string out;
    for (const auto& st : script.statements) out += format(st) + "\n";
    return out;
}

nlohmann::json to_json(const ExecReport& report) {
    nlohmann::json doc = {{"executed", report.executed},
                          {"revision_before", report.revision_before},
                          {"revision_after", report.revision_after}};
    if (report.failed_at) {
        doc["failed_at"] = {{"statement_index", report.failed_at->first},
                            {"error", {{"code", report.failed_at->second.code},
                                       {"message", report.failed_at->second.message}}}};
    }
    return doc;
}

ExecReport execute(Scene& scene, const Script& script, const ChangeSink& on_change) {
    ExecReport report;
    report.revision_before = scene.revision;
    for (std::size_t i = 0; i < script.statements.size(); ++i) {
        try {
            const std::string changed = run_statement(scene, script.statements[i]);
            if (on_change) on_change(scene, changed);
            ++report.executed;
        } catch (const Failure& f) {
            report.failed_at = {i, {f.code, f.message}};
            break;
        } catch (const SceneError& e) {
            report.failed_at = {i, {std::string(to_string(e.code())), e.what()}};
            break;
        }
    }
    report.revision_after = scene.revision;
    return report;
}

ExecReport execute(SceneHost& host, const Script& script) {
    return host.mutate([&](Scene& scene, const ChangeSink& sink) { return execute(scene, script, sink); });
}

}  // namespace comodel::dsl
