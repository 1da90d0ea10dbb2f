//! Conventional labels of the 106 Pingshui rhyme classes, in id order.
//! Ids 1-30 are the level-tone classes, 31-106 the oblique ones.

pub const RHYME_CLASS_COUNT: usize = 106;

const LABELS: [&str; RHYME_CLASS_COUNT] = [
    "上平一东",
    "上平二冬",
    "上平三江",
    "上平四支",
    "上平五微",
    "上平六鱼",
    "上平七虞",
    "上平八齐",
    "上平九佳",
    "上平十灰",
    "上平十一真",
    "上平十二文",
    "上平十三元",
    "上平十四寒",
    "上平十五删",
    "下平一先",
    "下平二萧",
    "下平三肴",
    "下平四豪",
    "下平五歌",
    "下平六麻",
    "下平七阳",
    "下平八庚",
    "下平九青",
    "下平十蒸",
    "下平十一尤",
    "下平十二侵",
    "下平十三覃",
    "下平十四盐",
    "下平十五咸",
    "上声一董",
    "上声二肿",
    "上声三讲",
    "上声四纸",
    "上声五尾",
    "上声六语",
    "上声七麌",
    "上声八荠",
    "上声九蟹",
    "上声十贿",
    "上声十一轸",
    "上声十二吻",
    "上声十三阮",
    "上声十四旱",
    "上声十五潸",
    "上声十六铣",
    "上声十七筱",
    "上声十八巧",
    "上声十九皓",
    "上声二十哿",
    "上声二十一马",
    "上声二十二养",
    "上声二十三梗",
    "上声二十四迥",
    "上声二十五有",
    "上声二十六寝",
    "上声二十七感",
    "上声二十八俭",
    "上声二十九豏",
    "去声一送",
    "去声二宋",
    "去声三绛",
    "去声四寘",
    "去声五未",
    "去声六御",
    "去声七遇",
    "去声八霁",
    "去声九泰",
    "去声十卦",
    "去声十一队",
    "去声十二震",
    "去声十三问",
    "去声十四愿",
    "去声十五翰",
    "去声十六谏",
    "去声十七霰",
    "去声十八啸",
    "去声十九效",
    "去声二十号",
    "去声二十一个",
    "去声二十二祃",
    "去声二十三漾",
    "去声二十四敬",
    "去声二十五径",
    "去声二十六宥",
    "去声二十七沁",
    "去声二十八勘",
    "去声二十九艳",
    "去声三十陷",
    "入声一屋",
    "入声二沃",
    "入声三觉",
    "入声四质",
    "入声五物",
    "入声六月",
    "入声七曷",
    "入声八黠",
    "入声九屑",
    "入声十药",
    "入声十一陌",
    "入声十二锡",
    "入声十三职",
    "入声十四缉",
    "入声十五合",
    "入声十六叶",
    "入声十七洽",
];

/// Label for class `id` (1-based); empty for ids outside `1..=106`.
pub fn class_label(id: u8) -> &'static str {
    LABELS.get((id as usize).wrapping_sub(1)).copied().unwrap_or("")
}
