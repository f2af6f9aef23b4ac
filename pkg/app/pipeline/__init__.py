# pipeline package init
