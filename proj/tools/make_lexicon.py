#!/usr/bin/env python3
"""Builds data/lexicon_vi.json: canonical Vietnamese words (frequency order),
abbreviation and teencode tables, and the per-character diacritic map.

The abbreviation table is hand-seeded with common forms and extended with
consonant skeletons ("được" -> "dc") and syllable initials for compounds
("sinh viên" -> "sv"). Teencode forms come from a hand list plus systematic
spelling substitutions ("quá" -> "wá"). A form is assigned to the first
(most frequent) word that claims it and never shadows a canonical word.
"""

import json
import sys
import unicodedata

WORDS = """
tôi không là có và của được cho người một này những các với mình thì đã bạn
rồi cũng lắm quá đi làm gì như vậy mà nó biết nói thấy ăn anh em chị ai khi
nào đó ở nhiều hơn rất còn lại nên vì sao muốn thích yêu tao mày chúng ta họ
về ra vào lên xuống tới đến từ trong ngoài trên dưới sau trước nay mai hôm
qua giờ lúc năm tháng ngày tuần đêm sáng chiều tối trưa nhà xe đường tiền
việc học chơi ngủ xem nghe đọc viết mua bán hỏi trả lời gọi chờ đợi thôi nhé
nha ạ ơi à hả hay đẹp xấu tốt vui buồn mệt khỏe đói no nóng lạnh mới cũ to
nhỏ dài ngắn cao thấp nhanh chậm dễ khó sợ thương nhớ quên hiểu tin nghĩ cảm
thật sự điều cái con chiếc bộ phim nhạc bài hát game máy tính mạng mặt tay
chân đầu mắt miệng tóc áo quần giày bàn ghế cửa phòng trường lớp thầy cô bố
mẹ ông bà bé trẻ già gái trai chồng vợ cả hết mỗi nhau luôn vẫn đang sẽ chưa
từng phải bị để nếu nhưng hoặc tại bởi cùng chỉ mấy bao nhiêu đâu kia ấy đấy
nhìn chạy đứng ngồi nằm mở đóng bật tắt gửi nhận giúp cần dùng thử chọn đổi
sửa hư hỏng giá rẻ đắt ngon dở sạch bẩn đông vắng xa gần sớm muộn trễ kịp ngay
liền thêm bớt nữa lần thứ hai ba bốn sáu bảy tám chín mười trăm nghìn triệu
cơm nước phở bánh trà sữa bia rượu thịt cá gà rau trái cây hoa lá trời mưa
nắng gió biển sông núi phố quê lòng tim đời sống chết khóc cười ôm hôn đánh
chửi mắng khen chê hiền dữ ngu khôn giỏi kém lười chăm đúng sai rõ hiện thế
kiểu loại chuyện tình đẹp trai xinh ngầu chán ghét giận vừa mãi hoài chắc
lẽ hình như thường hiếm khắp riêng chung tự nhiên khá hơi cực siêu đỉnh
cứ đâm ngây thơ lừa đủ thiếu bỏ giữ mất tìm thắng thua chỗ bên cạnh
nhất đầy trống mùa hè đông xuân thu tết quà sinh nhật bữa tiệc cưới đám
hàng quán chợ shop ship mạnh yếu giàu nghèo béo gầy
"""

COMPOUNDS = [
    "công an", "công ty", "sinh viên", "đại học", "mọi người", "như thế nào",
    "bây giờ", "hôm nay", "ngày mai", "hôm qua", "vợ chồng", "điện thoại",
    "bạn bè", "gia đình", "thời gian", "tại sao", "bình thường", "dễ thương",
    "cảm ơn", "xin lỗi", "khách hàng", "sản phẩm", "chất lượng", "giao hàng",
    "nhân viên", "học sinh", "thành phố", "việt nam", "sài gòn", "hà nội",
    "ngây thơ", "đâm ra", "cá mập", "trầm cảm", "thoải mái", "màn hình",
]

# Compounds are inserted at these frequency ranks.
COMPOUND_RANK_START = 60
COMPOUND_RANK_STRIDE = 7

HAND_ABBREV = {
    "ko": "không", "k": "không", "hk": "không", "kh": "không", "kg": "không",
    "dc": "được", "đc": "được", "j": "gì", "r": "rồi", "vs": "với",
    "cx": "cũng", "mk": "mình", "ms": "mới", "ng": "người", "bt": "biết",
    "cty": "công ty", "ca": "công an", "sv": "sinh viên", "đh": "đại học",
    "mn": "mọi người", "ntn": "như thế nào", "bh": "bây giờ", "t": "tao",
    "m": "mày", "b": "bạn", "a": "anh", "e": "em", "trc": "trước",
    "lm": "làm", "ns": "nói", "nc": "nước", "đt": "điện thoại",
    "vc": "vợ chồng", "sp": "sản phẩm", "nv": "nhân viên", "vn": "việt nam",
    "sg": "sài gòn", "hn": "hà nội",
    "xl": "xin lỗi", "tks": "cảm ơn", "thks": "cảm ơn", "gđ": "gia đình",
    "tg": "thời gian", "bth": "bình thường", "dth": "dễ thương",
    "hs": "học sinh", "clg": "chất lượng", "mh": "màn hình",
}

HAND_TEENCODE = {
    "z": "vậy", "zị": "vậy", "dzậy": "vậy", "thoai": "thôi", "thui": "thôi",
    "hem": "không", "hok": "không", "hông": "không", "iu": "yêu",
    "wá": "quá", "qá": "quá", "bít": "biết", "ròi": "rồi", "rùi": "rồi",
    "ck": "chồng", "vk": "vợ", "lun": "luôn", "mún": "muốn", "hix": "buồn",
    "zui": "vui", "ngta": "người", "bùn": "buồn",
    "đc": "được", "nhìu": "nhiều", "iêu": "yêu", "xink": "xinh",
    "khum": "không", "hong": "không", "dị": "vậy", "thik": "thích",
}

TEEN_SUBST = [
    ("qu", "w"), ("gi", "j"), ("ph", "f"), ("d", "z"), ("v", "z"),
    ("c", "k"), ("ng", "q"), ("ch", "ck"), ("nh", "nk"), ("x", "s"),
]

INITIALS = ["ngh", "ng", "nh", "ch", "gh", "gi", "kh", "ph", "qu", "th", "tr",
            "b", "c", "d", "đ", "g", "h", "k", "l", "m", "n", "p", "r", "s",
            "t", "v", "x"]
FINALS = ["ng", "nh", "ch", "c", "m", "n", "p", "t"]

MARKED = {
    "a": "àáảãạăằắẳẵặâầấẩẫậ", "e": "èéẻẽẹêềếểễệ", "i": "ìíỉĩị",
    "o": "òóỏõọôồốổỗộơờớởỡợ", "u": "ùúủũụưừứửữự", "y": "ỳýỷỹỵ", "d": "đ",
}


def diacritic_map():
    out = {}
    for base, marked in MARKED.items():
        for ch in marked:
            out[ch] = base
            out[ch.upper()] = base.upper()
    return out


DMAP = diacritic_map()


def strip(word):
    return "".join(DMAP.get(c, c) for c in word)


def skeleton(syllable):
    init = ""
    for cand in INITIALS:
        if syllable.startswith(cand):
            init = cand
            break
    rest = syllable[len(init):]
    fin = ""
    for cand in FINALS:
        if rest.endswith(cand) and len(rest) > len(cand):
            fin = cand
            break
    return strip(init + fin)


def ordered_words():
    seen = set()
    singles = []
    for w in WORDS.split():
        w = unicodedata.normalize("NFC", w)
        if w not in seen:
            seen.add(w)
            singles.append(w)
    words = []
    comp = [unicodedata.normalize("NFC", c) for c in COMPOUNDS]
    ci = 0
    for i, w in enumerate(singles):
        if i >= COMPOUND_RANK_START and (i - COMPOUND_RANK_START) % COMPOUND_RANK_STRIDE == 0 and ci < len(comp):
            if comp[ci] not in seen:
                words.append(comp[ci])
                seen.add(comp[ci])
            ci += 1
        words.append(w)
    for c in comp[ci:]:
        if c not in seen:
            words.append(c)
            seen.add(c)
    return words


def ends_doubled(w):
    return len(w) >= 2 and w[-1] == w[-2]


def main(out_path):
    words = ordered_words()
    canon = set(words)
    for w in words:
        assert not ends_doubled(w), w

    abbrev, teen = {}, {}

    def claim(table, form, target):
        form = unicodedata.normalize("NFC", form)
        if not form or form in canon or form in abbrev or form in teen:
            return
        if form == target or ends_doubled(form):
            return
        table[form] = target

    for form, target in HAND_ABBREV.items():
        if target in canon:
            claim(abbrev, form, target)
    for form, target in HAND_TEENCODE.items():
        if target in canon:
            claim(teen, form, target)

    for w in words:
        parts = w.split(" ")
        if len(parts) > 1:
            claim(abbrev, "".join(strip(p[0]) for p in parts), w)
        else:
            sk = skeleton(w)
            if len(sk) >= 2:
                claim(abbrev, sk, w)

    for w in words:
        if " " in w:
            continue
        for old, new in TEEN_SUBST:
            if old in ("d", "v", "c") and not w.startswith(old):
                continue
            if old == "c" and w.startswith("ch"):
                continue
            if old in ("ng", "ch", "nh") and not w.endswith(old):
                continue
            if old in ("ng", "ch", "nh"):
                form = w[: -len(old)] + new
            elif old in w:
                form = w.replace(old, new, 1)
            else:
                continue
            claim(teen, form, w)
            break

    lexicon = {
        "canonical_words": words,
        "abbreviation_table": dict(sorted(abbrev.items())),
        "teencode_table": dict(sorted(teen.items())),
        "diacritic_map": dict(sorted(DMAP.items())),
    }
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(lexicon, f, ensure_ascii=False, indent=1)
        f.write("\n")
    print(f"{len(words)} words, {len(abbrev)} abbreviations, {len(teen)} teencode forms",
          file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/lexicon_vi.json")
