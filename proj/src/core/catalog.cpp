#include "usersim/core/catalog.hpp"

#include <algorithm>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

ItemCatalog::ItemCatalog(std::vector<Item> items) {
    for (auto& item : items) {
        item.id = text::trim(item.id);
        item.title = text::normalize_space(item.title);
        item.description = text::normalize_space(item.description);
        std::set<std::string> cats;
        for (const auto& c : item.categories) {
            auto n = text::normalize_space(c);
            if (!n.empty()) cats.insert(std::move(n));
        }
        item.categories = std::move(cats);
        if (item.id.empty()) throw SimError(ErrorCode::CatalogInvalid, "item with empty id");
        if (item.categories.empty())
            throw SimError(ErrorCode::CatalogInvalid, "item '" + item.id + "' has no categories");
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].id == items[i - 1].id)
            throw SimError(ErrorCode::DuplicateId, "duplicate item id '" + items[i].id + "'");
    }
    items_ = std::move(items);
    for (std::size_t i = 0; i < items_.size(); ++i) {
        by_id_.emplace(items_[i].id, i);
        by_title_.emplace(text::title_key(items_[i].title), i);  // first id wins on title clash
        categories_.insert(items_[i].categories.begin(), items_[i].categories.end());
    }
}

const Item* ItemCatalog::find(const ItemId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &items_[it->second];
}

std::optional<std::size_t> ItemCatalog::index_of(const ItemId& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

const Item* ItemCatalog::find_by_title(std::string_view title) const {
    auto it = by_title_.find(text::title_key(title));
    return it == by_title_.end() ? nullptr : &items_[it->second];
}

ItemCatalog load_catalog_csv(std::string_view csv_content) {
    auto rows = text::parse_csv(csv_content);
    if (rows.empty()) throw SimError(ErrorCode::CatalogInvalid, "catalog has no header");
    const std::vector<std::string> expected = {"id", "title", "description", "categories"};
    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(text::trim(h));
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    if (header != expected)
        throw SimError(ErrorCode::CatalogInvalid, "catalog header must be id,title,description,categories");
    std::vector<Item> items;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        if (row.size() != 4)
            throw SimError(ErrorCode::CatalogInvalid,
                           "catalog row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                               " fields, expected 4");
        Item item;
        item.id = row[0];
        item.title = row[1];
        item.description = row[2];
        for (auto& c : text::split(row[3], "|")) item.categories.insert(c);
        items.push_back(std::move(item));
    }
    return ItemCatalog(std::move(items));
}

ItemCatalog load_catalog_file(const std::string& path) { return load_catalog_csv(text::read_file(path)); }

std::string catalog_to_csv(const ItemCatalog& catalog) {
    std::string out = "id,title,description,categories\n";
    for (const auto& item : catalog.items()) {
        std::vector<std::string> cats(item.categories.begin(), item.categories.end());
        out += text::csv_escape(item.id) + "," + text::csv_escape(item.title) + "," +
               text::csv_escape(item.description) + "," + text::csv_escape(text::join(cats, "|")) + "\n";
    }
    return out;
}

}  // namespace usersim
